#include "wins/cli_runner.hpp"

int main(int argc, char** argv) { return wins::run_cli(argc, argv); }
