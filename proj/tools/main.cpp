#include "cli.hpp"

int main(int argc, char** argv) { return efy::cli::run_cli(argc, argv); }
