#include "involve/cli.h"

int main(int argc, char** argv) { return involve::run_cli(argc, argv); }
