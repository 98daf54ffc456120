#include "chaos_tails/cli.hpp"

int main(int argc, char** argv) { return chaos_tails::run_cli(argc, argv); }
