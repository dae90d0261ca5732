#include <iostream>

int main() {
  std::cout << "ppl cli placeholder\n";
  return 0;
}
