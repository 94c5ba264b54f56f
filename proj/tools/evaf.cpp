#include "evaf/cli.hpp"

int main(int argc, char** argv) { return evaf::run_cli(argc, argv); }
