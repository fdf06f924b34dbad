#include "tac/pipeline.hpp"

int main(int argc, char** argv) { return tac::pipeline::run_cli(argc, argv); }
