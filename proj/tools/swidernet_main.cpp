#include "swidernet/cli.hpp"

int main(int argc, char** argv) { return swidernet::run_cli(argc, argv); }
