#include "lfpw/bitset.hpp"

#include <cassert>

namespace lfpw {

Bitset::Bitset(std::size_t nbits, bool value)
    : nbits_(nbits), words_((nbits + kWordBits - 1) / kWordBits, value ? ~Word{0} : Word{0}) {
  trim();
}

void Bitset::trim() {
  const std::size_t tail = nbits_ % kWordBits;
  if (tail != 0 && !words_.empty()) words_.back() &= (Word{1} << tail) - 1;
}

void Bitset::clear() {
  for (Word& w : words_) w = 0;
}

void Bitset::fill() {
  for (Word& w : words_) w = ~Word{0};
  trim();
}

std::size_t Bitset::count() const {
  return static_cast<std::size_t>(simd::active_kernels().popcount(words_.data(), words_.size()));
}

bool Bitset::any() const { return simd::active_kernels().any(words_.data(), words_.size()); }

Bitset& Bitset::operator&=(const Bitset& other) {
  assert(nbits_ == other.nbits_);
  simd::active_kernels().and_words(words_.data(), words_.data(), other.words_.data(), words_.size());
  return *this;
}

Bitset& Bitset::operator|=(const Bitset& other) {
  assert(nbits_ == other.nbits_);
  simd::active_kernels().or_words(words_.data(), words_.data(), other.words_.data(), words_.size());
  return *this;
}

Bitset& Bitset::subtract(const Bitset& other) {
  assert(nbits_ == other.nbits_);
  simd::active_kernels().andnot_words(words_.data(), words_.data(), other.words_.data(), words_.size());
  return *this;
}

void Bitset::complement() {
  for (Word& w : words_) w = ~w;
  trim();
}

bool Bitset::is_subset_of(const Bitset& other) const {
  assert(nbits_ == other.nbits_);
  return simd::active_kernels().is_subset(words_.data(), other.words_.data(), words_.size());
}

bool Bitset::intersects(const Bitset& other) const {
  assert(nbits_ == other.nbits_);
  return simd::active_kernels().intersects(words_.data(), other.words_.data(), words_.size());
}

bool Bitset::operator==(const Bitset& other) const {
  return nbits_ == other.nbits_ &&
         simd::active_kernels().equal(words_.data(), other.words_.data(), words_.size());
}

std::size_t Bitset::find_next(std::size_t from) const {
  if (from >= nbits_) return npos;
  std::size_t w = from / kWordBits;
  Word bits = words_[w] & (~Word{0} << (from % kWordBits));
  while (true) {
    if (bits != 0) return w * kWordBits + static_cast<std::size_t>(std::countr_zero(bits));
    if (++w == words_.size()) return npos;
    bits = words_[w];
  }
}

std::vector<std::size_t> Bitset::to_indices() const {
  std::vector<std::size_t> out;
  out.reserve(count());
  for_each([&](std::size_t i) { out.push_back(i); });
  return out;
}

Bitset operator&(Bitset a, const Bitset& b) { return a &= b; }
Bitset operator|(Bitset a, const Bitset& b) { return a |= b; }
Bitset difference(Bitset a, const Bitset& b) { return a.subtract(b); }

}  // namespace lfpw
