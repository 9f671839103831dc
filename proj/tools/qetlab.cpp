#include "qetlab/cli.hpp"

int main(int argc, char** argv) { return qetlab::cli_main(argc, argv); }
