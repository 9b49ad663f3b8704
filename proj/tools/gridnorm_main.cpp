#include "gridnorm/cli_io.hpp"

int main(int argc, char** argv) { return gridnorm::run_cli(argc, argv); }
