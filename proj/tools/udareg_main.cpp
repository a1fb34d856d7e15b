#include "udareg/cli.hpp"

int main(int argc, char** argv) { return udareg::run_cli(argc, argv); }
