#include "instfmt/cli.hpp"

int main(int argc, char** argv) { return instfmt::run_cli(argc, argv); }
