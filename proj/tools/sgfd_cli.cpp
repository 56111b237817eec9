#include "sgfd.h"
int main() { return 0; }
