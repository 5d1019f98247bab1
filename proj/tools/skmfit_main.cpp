#include "skmfit/cli.hpp"

int main(int argc, char** argv) { return skmfit::run_cli(argc, argv); }
