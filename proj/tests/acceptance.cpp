#include <iostream>

#include "nmpfunnel/testing/acceptance.hpp"

int main() {
  const auto results = nmpfunnel::testing::run_acceptance();
  const bool ok = nmpfunnel::testing::print_acceptance(results, std::cout);
  return ok ? 0 : 1;
}
