#include <iostream>

int main(int argc, char** argv) {
  (void)argc;
  (void)argv;
  std::cout << "dlokit: command-line harness (subcommands land with the harness module)\n";
  return 0;
}
