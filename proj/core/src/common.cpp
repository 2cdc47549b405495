#include "fblab/common.hpp"

#include <cstdlib>
#include <string>
#include <thread>

namespace fblab {

int thread_budget() {
  static const int budget = [] {
    const char* env = std::getenv("FBLAB_THREADS");
    if (env == nullptr) return 1;
    int n = 1;
    try {
      n = std::stoi(env);
    } catch (...) {
      return 1;
    }
    if (n < 1) return 1;
    unsigned hw = std::thread::hardware_concurrency();
    if (hw > 0 && n > static_cast<int>(hw)) n = static_cast<int>(hw);
    return n;
  }();
  return budget;
}

}  // namespace fblab
