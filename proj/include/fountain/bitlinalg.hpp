#pragma once

// GF(2) kernel: packed bit vectors, the column-major incidence structure
// the peeling decoder works on, and a small dense matrix with Gaussian
// elimination for the finalization stage.

#include <algorithm>
#include <bit>
#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <variant>
#include <vector>

#include "fountain/errors.hpp"

namespace fountain {

class BitVector {
public:
    using word_type = std::uint64_t;
    static constexpr std::size_t word_bits = 64;

    BitVector() = default;
    explicit BitVector(std::size_t bits) : bits_(bits), words_(word_count(bits), 0) {}

    static BitVector from_string(std::string_view s) {
        BitVector v(s.size());
        for (std::size_t i = 0; i < s.size(); ++i) {
            if (s[i] == '1') v.set(i);
            else if (s[i] != '0') throw UsageError("BitVector::from_string: expected '0' or '1'");
        }
        return v;
    }

    static BitVector from_bytes(std::span<const std::uint8_t> bytes) {
        BitVector v(bytes.size() * 8);
        for (std::size_t i = 0; i < bytes.size(); ++i)
            v.words_[i / 8] |= word_type{bytes[i]} << (8 * (i % 8));
        return v;
    }

    [[nodiscard]] std::vector<std::uint8_t> to_bytes() const {
        std::vector<std::uint8_t> out((bits_ + 7) / 8);
        for (std::size_t i = 0; i < out.size(); ++i)
            out[i] = static_cast<std::uint8_t>(words_[i / 8] >> (8 * (i % 8)));
        return out;
    }

    [[nodiscard]] std::string to_string() const {
        std::string s(bits_, '0');
        for (std::size_t i = 0; i < bits_; ++i)
            if (test(i)) s[i] = '1';
        return s;
    }

    [[nodiscard]] std::size_t size() const noexcept { return bits_; }
    [[nodiscard]] bool empty() const noexcept { return bits_ == 0; }
    [[nodiscard]] std::span<const word_type> words() const noexcept { return words_; }
    [[nodiscard]] std::span<word_type> words() noexcept { return words_; }

    [[nodiscard]] bool test(std::size_t i) const noexcept {
        return (words_[i / word_bits] >> (i % word_bits)) & 1U;
    }
    void set(std::size_t i) noexcept { words_[i / word_bits] |= word_type{1} << (i % word_bits); }
    void reset(std::size_t i) noexcept { words_[i / word_bits] &= ~(word_type{1} << (i % word_bits)); }
    void flip(std::size_t i) noexcept { words_[i / word_bits] ^= word_type{1} << (i % word_bits); }

    // Grows (zero-extending) or shrinks; bits beyond the new size are cleared.
    void resize(std::size_t bits) {
        words_.resize(word_count(bits), 0);
        bits_ = bits;
        clear_tail();
    }

    void clear() noexcept { std::fill(words_.begin(), words_.end(), 0); }

    [[nodiscard]] std::size_t popcount() const noexcept {
        std::size_t n = 0;
        for (auto w : words_) n += static_cast<std::size_t>(std::popcount(w));
        return n;
    }

    [[nodiscard]] bool none() const noexcept {
        return std::all_of(words_.begin(), words_.end(), [](word_type w) { return w == 0; });
    }
    [[nodiscard]] bool any() const noexcept { return !none(); }

    // Index of the lowest set bit at or after `from`, or size() if none.
    [[nodiscard]] std::size_t find_next(std::size_t from) const noexcept {
        if (from >= bits_) return bits_;
        std::size_t w = from / word_bits;
        word_type cur = words_[w] & (~word_type{0} << (from % word_bits));
        while (true) {
            if (cur != 0) return w * word_bits + static_cast<std::size_t>(std::countr_zero(cur));
            if (++w == words_.size()) return bits_;
            cur = words_[w];
        }
    }
    [[nodiscard]] std::size_t find_first() const noexcept { return find_next(0); }

    template <typename F>
    void for_each_set(F&& f) const {
        for (std::size_t w = 0; w < words_.size(); ++w) {
            word_type cur = words_[w];
            while (cur != 0) {
                f(w * word_bits + static_cast<std::size_t>(std::countr_zero(cur)));
                cur &= cur - 1;
            }
        }
    }

    BitVector& operator^=(const BitVector& other) {
        if (other.bits_ != bits_) throw UsageError("BitVector xor: length mismatch");
        for (std::size_t i = 0; i < words_.size(); ++i) words_[i] ^= other.words_[i];
        return *this;
    }

    friend BitVector operator^(BitVector a, const BitVector& b) { return a ^= b; }
    friend bool operator==(const BitVector&, const BitVector&) = default;

private:
    static constexpr std::size_t word_count(std::size_t bits) { return (bits + word_bits - 1) / word_bits; }

    void clear_tail() noexcept {
        if (bits_ % word_bits != 0)
            words_.back() &= (word_type{1} << (bits_ % word_bits)) - 1;
    }

    std::size_t bits_ = 0;
    std::vector<word_type> words_;
};

// dst := dst XOR src. Lengths must match.
inline BitVector& xor_into(BitVector& dst, const BitVector& src) { return dst ^= src; }

// XOR for masks over a growing variable set: the shorter operand is
// implicitly zero-extended.
inline void xor_extend(BitVector& dst, const BitVector& src) {
    if (src.size() > dst.size()) dst.resize(src.size());
    auto d = dst.words();
    auto s = src.words();
    for (std::size_t i = 0; i < s.size(); ++i) d[i] ^= s[i];
}

// Column-major 0/1 incidence matrix with a row -> columns reverse index.
// Rows can be removed; each column tracks its live degree and the XOR of
// its live row indices, so the sole remaining row of a degree-1 column is
// available in O(1).
class SparseColumnMatrix {
public:
    using index_type = std::uint32_t;

    SparseColumnMatrix() = default;
    explicit SparseColumnMatrix(std::size_t rows) : row_cols_(rows), row_live_(rows, 1) {}

    [[nodiscard]] std::size_t rows() const noexcept { return row_cols_.size(); }
    [[nodiscard]] std::size_t cols() const noexcept { return col_rows_.size(); }

    // Appends a column; `rows` must be strictly increasing and < rows().
    std::size_t add_column(std::vector<index_type> rows) {
        for (std::size_t i = 0; i < rows.size(); ++i) {
            if (rows[i] >= row_cols_.size()) throw UsageError("SparseColumnMatrix: row index out of range");
            if (i > 0 && rows[i] <= rows[i - 1])
                throw UsageError("SparseColumnMatrix: row indices must be strictly increasing");
        }
        const auto c = static_cast<index_type>(col_rows_.size());
        index_type x = 0;
        std::uint32_t live = 0;
        for (auto r : rows) {
            row_cols_[r].push_back(c);
            if (row_live_[r]) {
                x ^= r;
                ++live;
            }
        }
        col_rows_.push_back(std::move(rows));
        col_degree_.push_back(live);
        col_xor_.push_back(x);
        return c;
    }

    [[nodiscard]] std::span<const index_type> column(std::size_t c) const { return col_rows_[c]; }
    [[nodiscard]] std::span<const index_type> row(std::size_t r) const { return row_cols_[r]; }
    [[nodiscard]] std::size_t degree(std::size_t c) const { return col_degree_[c]; }
    [[nodiscard]] bool row_live(std::size_t r) const { return row_live_[r] != 0; }

    // Valid only when degree(c) == 1.
    [[nodiscard]] index_type sole_row(std::size_t c) const { return col_xor_[c]; }

    [[nodiscard]] std::vector<index_type> live_rows(std::size_t c) const {
        std::vector<index_type> out;
        out.reserve(col_degree_[c]);
        for (auto r : col_rows_[c])
            if (row_live_[r]) out.push_back(r);
        return out;
    }

    // Removes row r; `on_column(c, new_degree)` is called once for every
    // column that contained it.
    template <typename F>
    void remove_row(std::size_t r, F&& on_column) {
        if (!row_live_[r]) return;
        row_live_[r] = 0;
        for (auto c : row_cols_[r]) {
            --col_degree_[c];
            col_xor_[c] ^= static_cast<index_type>(r);
            on_column(static_cast<std::size_t>(c), static_cast<std::size_t>(col_degree_[c]));
        }
    }
    void remove_row(std::size_t r) {
        remove_row(r, [](std::size_t, std::size_t) {});
    }

private:
    std::vector<std::vector<index_type>> col_rows_;
    std::vector<std::vector<index_type>> row_cols_;
    std::vector<std::uint8_t> row_live_;
    std::vector<std::uint32_t> col_degree_;
    std::vector<index_type> col_xor_;
};

struct RankDeficiency {
    std::size_t rank = 0;
    // Non-pivot columns in elimination order; fixing these makes the rest solvable.
    std::vector<std::size_t> free_columns;
};

// Unique assignment, one value per column variable.
struct Solution {
    std::vector<BitVector> values;
};

using SolveResult = std::variant<Solution, RankDeficiency>;

// Small dense GF(2) matrix stored as packed rows.
class DenseBitMatrix {
public:
    DenseBitMatrix() = default;
    DenseBitMatrix(std::size_t rows, std::size_t cols) : cols_(cols), rows_(rows, BitVector(cols)) {}

    static DenseBitMatrix from_rows(std::span<const std::string_view> rows) {
        const std::size_t cols = rows.empty() ? 0 : rows.front().size();
        DenseBitMatrix m(0, cols);
        for (auto r : rows) {
            if (r.size() != cols) throw UsageError("DenseBitMatrix::from_rows: ragged rows");
            m.rows_.push_back(BitVector::from_string(r));
        }
        return m;
    }

    [[nodiscard]] std::size_t rows() const noexcept { return rows_.size(); }
    [[nodiscard]] std::size_t cols() const noexcept { return cols_; }

    [[nodiscard]] bool get(std::size_t r, std::size_t c) const { return rows_[r].test(c); }
    void set(std::size_t r, std::size_t c, bool v = true) {
        if (v) rows_[r].set(c);
        else rows_[r].reset(c);
    }
    [[nodiscard]] const BitVector& row(std::size_t r) const { return rows_[r]; }
    BitVector& row(std::size_t r) { return rows_[r]; }

    void append_row(BitVector row) {
        if (row.size() != cols_) throw UsageError("DenseBitMatrix::append_row: width mismatch");
        rows_.push_back(std::move(row));
    }

    // Matrix-vector product over per-column symbol values.
    [[nodiscard]] std::vector<BitVector> multiply(std::span<const BitVector> values) const {
        if (values.size() != cols_) throw UsageError("DenseBitMatrix::multiply: value count mismatch");
        const std::size_t width = values.empty() ? 0 : values.front().size();
        std::vector<BitVector> out(rows_.size(), BitVector(width));
        for (std::size_t r = 0; r < rows_.size(); ++r)
            rows_[r].for_each_set([&](std::size_t c) { out[r] ^= values[c]; });
        return out;
    }

    [[nodiscard]] std::size_t rank() const {
        auto work = rows_;
        std::size_t rank = 0;
        for (std::size_t c = 0; c < cols_ && rank < work.size(); ++c) {
            std::size_t pivot = rank;
            while (pivot < work.size() && !work[pivot].test(c)) ++pivot;
            if (pivot == work.size()) continue;
            std::swap(work[rank], work[pivot]);
            for (std::size_t r = rank + 1; r < work.size(); ++r)
                if (work[r].test(c)) work[r] ^= work[rank];
            ++rank;
        }
        return rank;
    }

    // Solves M x = rhs by Gauss-Jordan elimination. Throws
    // InconsistentSystem when a row reduces to zero with a nonzero rhs.
    // `row_ops`, when given, accumulates the number of row XORs performed.
    [[nodiscard]] SolveResult solve(std::span<const BitVector> rhs, std::size_t* row_ops = nullptr) const {
        if (rhs.size() != rows_.size()) throw UsageError("DenseBitMatrix::solve: rhs length must equal row count");
        auto work = rows_;
        std::vector<BitVector> vals(rhs.begin(), rhs.end());
        std::vector<std::size_t> pivot_cols;
        std::vector<std::size_t> free_cols;
        std::size_t rank = 0;
        std::size_t ops = 0;
        for (std::size_t c = 0; c < cols_; ++c) {
            std::size_t pivot = rank;
            while (pivot < work.size() && !work[pivot].test(c)) ++pivot;
            if (pivot == work.size()) {
                free_cols.push_back(c);
                continue;
            }
            std::swap(work[rank], work[pivot]);
            std::swap(vals[rank], vals[pivot]);
            for (std::size_t r = 0; r < work.size(); ++r) {
                if (r != rank && work[r].test(c)) {
                    work[r] ^= work[rank];
                    vals[r] ^= vals[rank];
                    ++ops;
                }
            }
            pivot_cols.push_back(c);
            ++rank;
        }
        if (row_ops) *row_ops += ops;
        for (std::size_t r = rank; r < work.size(); ++r)
            if (vals[r].any()) throw InconsistentSystem("DenseBitMatrix::solve: inconsistent system");
        if (rank < cols_) return RankDeficiency{rank, std::move(free_cols)};
        Solution sol;
        sol.values.resize(cols_);
        for (std::size_t r = 0; r < rank; ++r) sol.values[pivot_cols[r]] = std::move(vals[r]);
        return sol;
    }

private:
    std::size_t cols_ = 0;
    std::vector<BitVector> rows_;
};

inline std::size_t rank(const DenseBitMatrix& m) { return m.rank(); }

inline SolveResult solve(const DenseBitMatrix& m, std::span<const BitVector> rhs) { return m.solve(rhs); }

} // namespace fountain
