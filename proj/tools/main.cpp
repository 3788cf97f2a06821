#include "permbo/cli.hpp"

int main(int argc, char** argv) { return permbo::run_cli(argc, argv); }
