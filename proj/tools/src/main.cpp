#include "scovreg_cli/commands.hpp"

int main(int argc, char** argv) { return scovreg::cli::run_cli(argc, argv); }
