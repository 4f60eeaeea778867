#include "ptm/cli.hpp"

int main(int argc, char** argv) { return ptm::cli::run_cli(argc, argv); }
