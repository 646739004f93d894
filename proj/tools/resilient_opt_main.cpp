#include "ropt/cli.hpp"

int main(int argc, char** argv) { return ropt::cli_main(argc, argv); }
