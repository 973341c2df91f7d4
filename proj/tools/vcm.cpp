#include "vcm/cli.hpp"

int main(int argc, char** argv) { return vcm::cli_main(argc, argv); }
