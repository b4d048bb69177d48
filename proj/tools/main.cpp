#include "dvfsflow/cli.hpp"

int main(int argc, char** argv) { return dvfsflow::run_cli(argc, argv); }
