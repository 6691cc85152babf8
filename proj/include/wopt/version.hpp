#pragma once

#define WOPT_VERSION "0.1.0"
