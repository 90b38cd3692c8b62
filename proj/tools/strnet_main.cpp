#include "strnet/cli.hpp"

int main(int argc, char** argv) { return strnet::run_cli(argc, argv); }
