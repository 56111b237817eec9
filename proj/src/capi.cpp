#include "sgfd.h"

const char* sgfd_version(void) { return "0.1.0"; }
