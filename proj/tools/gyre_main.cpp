#include "gyre/cli.hpp"

int main(int argc, char** argv) { return gyre::cli_main(argc, argv); }
