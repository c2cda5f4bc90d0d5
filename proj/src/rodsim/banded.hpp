#pragma once

#include <Eigen/SparseCore>
#include <vector>

#include "types.hpp"

namespace rodsim {

// Symmetric banded matrix storing the upper bands only. The 11-DOF stencil of
// an interior rod node gives half-bandwidth 10 in the interleaved DOF layout.
class BandedSym {
public:
    BandedSym() = default;
    BandedSym(int n, int half_bandwidth)
        : n_(n), hb_(half_bandwidth), data_(VecX::Zero(static_cast<Eigen::Index>(n) * (half_bandwidth + 1))) {}

    int size() const { return n_; }
    int half_bandwidth() const { return hb_; }

    // Accumulate into entry (i, j). Only the upper triangle is stored; callers
    // must pass each symmetric pair once (j >= i).
    void add_upper(int i, int j, double v) { data_[idx(i, j)] += v; }

    double at(int i, int j) const {
        if (j < i) std::swap(i, j);
        if (j - i > hb_) return 0.0;
        return data_[idx(i, j)];
    }

    void set_zero() { data_.setZero(); }

    MatX dense() const {
        MatX m = MatX::Zero(n_, n_);
        for (int i = 0; i < n_; ++i)
            for (int j = i; j <= std::min(n_ - 1, i + hb_); ++j)
                m(i, j) = m(j, i) = data_[idx(i, j)];
        return m;
    }

    // Append the full (symmetrized) matrix as triplets, remapping local row i
    // to index_map[i].
    void append_triplets(std::vector<Eigen::Triplet<double>>& out,
                         const std::vector<int>& index_map) const {
        for (int i = 0; i < n_; ++i) {
            for (int j = i; j <= std::min(n_ - 1, i + hb_); ++j) {
                const double v = data_[idx(i, j)];
                if (v == 0.0) continue;
                out.emplace_back(index_map[i], index_map[j], v);
                if (i != j) out.emplace_back(index_map[j], index_map[i], v);
            }
        }
    }

    BandedSym& operator+=(const BandedSym& other) {
        data_ += other.data_;
        return *this;
    }

private:
    Eigen::Index idx(int i, int j) const {
        // diagonal d = j - i in [0, hb], column j
        return static_cast<Eigen::Index>(j - i) * n_ + j;
    }

    int n_ = 0;
    int hb_ = 0;
    VecX data_;
};

}  // namespace rodsim
