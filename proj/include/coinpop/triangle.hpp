#pragma once
#include <cstddef>
#include <stdexcept>
#include <vector>

namespace coinpop {

// Row-major triangular array: rows n = 0..n_max, row n holds entries
// k = 0..n. The (n, k) cell of row n lives at offset n(n+1)/2 + k.
template <typename T>
class TriArray {
 public:
  TriArray() : n_max_(-1) {}
  explicit TriArray(int n_max, T fill = T{})
      : n_max_(n_max),
        data_(static_cast<std::size_t>(n_max + 1) * (n_max + 2) / 2, fill) {
    if (n_max < 0) throw std::invalid_argument("TriArray: n_max < 0");
  }

  int n_max() const { return n_max_; }
  std::size_t size() const { return data_.size(); }

  T& at(int n, int k) { return data_[index(n, k)]; }
  const T& at(int n, int k) const { return data_[index(n, k)]; }

  const std::vector<T>& flat() const { return data_; }
  std::vector<T>& flat() { return data_; }

 private:
  std::size_t index(int n, int k) const {
    if (n < 0 || n > n_max_ || k < 0 || k > n)
      throw std::out_of_range("TriArray: bad (n,k)");
    return static_cast<std::size_t>(n) * (n + 1) / 2 + k;
  }

  int n_max_;
  std::vector<T> data_;
};

}  // namespace coinpop
