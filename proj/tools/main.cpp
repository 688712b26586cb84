#include "fkp/cli.hpp"

int main(int argc, char** argv) { return fkp::cli::run_cli(argc, argv); }
