#include <cstdio>

int main() {
  std::puts("fblab: runner not wired yet");
  return 0;
}
