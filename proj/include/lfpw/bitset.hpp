#pragma once

#include <bit>
#include <cstddef>
#include <cstdint>
#include <vector>

#include "lfpw/simd/bitset_kernels.hpp"

namespace lfpw {

// Fixed-size dense bitset. Bulk operations go through the runtime-selected
// kernel table; bits past size() are kept zero.
class Bitset {
 public:
  using Word = simd::Word;
  static constexpr std::size_t kWordBits = 64;
  static constexpr std::size_t npos = static_cast<std::size_t>(-1);

  Bitset() = default;
  explicit Bitset(std::size_t nbits, bool value = false);

  std::size_t size() const { return nbits_; }
  std::size_t word_count() const { return words_.size(); }
  const Word* data() const { return words_.data(); }
  Word* data() { return words_.data(); }

  bool test(std::size_t i) const { return (words_[i / kWordBits] >> (i % kWordBits)) & 1U; }
  void set(std::size_t i) { words_[i / kWordBits] |= Word{1} << (i % kWordBits); }
  void reset(std::size_t i) { words_[i / kWordBits] &= ~(Word{1} << (i % kWordBits)); }
  // Sets bit i and reports whether it was previously clear.
  bool insert(std::size_t i) {
    Word& w = words_[i / kWordBits];
    const Word mask = Word{1} << (i % kWordBits);
    const bool fresh = (w & mask) == 0;
    w |= mask;
    return fresh;
  }

  void clear();
  void fill();

  std::size_t count() const;
  bool any() const;
  bool none() const { return !any(); }

  Bitset& operator&=(const Bitset& other);
  Bitset& operator|=(const Bitset& other);
  // this &= ~other
  Bitset& subtract(const Bitset& other);
  void complement();

  bool is_subset_of(const Bitset& other) const;
  bool intersects(const Bitset& other) const;
  bool operator==(const Bitset& other) const;

  std::size_t find_first() const { return find_next(0); }
  // First set bit with index >= from, or npos.
  std::size_t find_next(std::size_t from) const;

  template <typename F>
  void for_each(F&& f) const {
    for (std::size_t w = 0; w < words_.size(); ++w) {
      Word bits = words_[w];
      while (bits != 0) {
        const auto bit = static_cast<std::size_t>(std::countr_zero(bits));
        f(w * kWordBits + bit);
        bits &= bits - 1;
      }
    }
  }

  std::vector<std::size_t> to_indices() const;

 private:
  void trim();

  std::size_t nbits_ = 0;
  std::vector<Word> words_;
};

Bitset operator&(Bitset a, const Bitset& b);
Bitset operator|(Bitset a, const Bitset& b);
Bitset difference(Bitset a, const Bitset& b);

}  // namespace lfpw
