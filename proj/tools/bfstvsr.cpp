#include "bfstvsr/cli.hpp"

int main(int argc, char** argv) { return bfstvsr::run_cli(argc, argv); }
