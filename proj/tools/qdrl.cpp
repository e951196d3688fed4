#include "qdrl/cli.hpp"

int main(int argc, char** argv) { return qdrl::run_cli(argc, argv); }
