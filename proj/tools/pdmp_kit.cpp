#include "pdmp/cli.hpp"

int main(int argc, char** argv) { return pdmp::cli::run_cli(argc, argv); }
