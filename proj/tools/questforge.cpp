#include "questforge/cli.hpp"

int main(int argc, char** argv) { return questforge::cli::run_cli(argc, argv); }
