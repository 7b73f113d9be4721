#pragma once

#include <bit>
#include <cstdint>
#include <vector>

namespace bitour {

// Dynamic fixed-capacity bitset. All graphs here are small, so neighborhood
// sets live in a handful of 64-bit words and set algebra is word-parallel.
class bitset {
public:
    bitset() = default;
    explicit bitset(int n) : n_(n), words_((n + 63) / 64, 0) {}

    int capacity() const { return n_; }

    void set(int i) { words_[i >> 6] |= (std::uint64_t{1} << (i & 63)); }
    void reset(int i) { words_[i >> 6] &= ~(std::uint64_t{1} << (i & 63)); }
    bool test(int i) const { return (words_[i >> 6] >> (i & 63)) & 1; }

    int count() const {
        int c = 0;
        for (auto w : words_) c += std::popcount(w);
        return c;
    }

    bool any() const {
        for (auto w : words_)
            if (w) return true;
        return false;
    }

    bool none() const { return !any(); }

    void clear() {
        for (auto& w : words_) w = 0;
    }

    int count_and(const bitset& o) const {
        int c = 0;
        for (std::size_t i = 0; i < words_.size(); ++i)
            c += std::popcount(words_[i] & o.words_[i]);
        return c;
    }

    bool intersects(const bitset& o) const {
        for (std::size_t i = 0; i < words_.size(); ++i)
            if (words_[i] & o.words_[i]) return true;
        return false;
    }

    bitset& operator|=(const bitset& o) {
        for (std::size_t i = 0; i < words_.size(); ++i) words_[i] |= o.words_[i];
        return *this;
    }

    bitset& operator&=(const bitset& o) {
        for (std::size_t i = 0; i < words_.size(); ++i) words_[i] &= o.words_[i];
        return *this;
    }

    bitset& operator-=(const bitset& o) {
        for (std::size_t i = 0; i < words_.size(); ++i) words_[i] &= ~o.words_[i];
        return *this;
    }

    bool operator==(const bitset& o) const = default;

    // Lowest set bit at index >= from, or -1.
    int next(int from = 0) const {
        if (from >= n_) return -1;
        std::size_t wi = from >> 6;
        std::uint64_t w = words_[wi] & (~std::uint64_t{0} << (from & 63));
        while (true) {
            if (w) {
                int i = int(wi * 64) + std::countr_zero(w);
                return i < n_ ? i : -1;
            }
            if (++wi >= words_.size()) return -1;
            w = words_[wi];
        }
    }

    std::vector<int> to_vector() const {
        std::vector<int> out;
        for (int i = next(0); i >= 0; i = next(i + 1)) out.push_back(i);
        return out;
    }

private:
    int n_ = 0;
    std::vector<std::uint64_t> words_;
};

template <typename F>
void for_each_bit(const bitset& b, F&& f) {
    for (int i = b.next(0); i >= 0; i = b.next(i + 1)) f(i);
}

}  // namespace bitour
