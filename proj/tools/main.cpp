#include "nlsid/cli.hpp"

int main(int argc, char** argv) { return nlsid::cli::cli_run(argc, argv); }
