#include "csieve/cli.hpp"

int main(int argc, char** argv) { return csieve::run_cli(argc, argv); }
