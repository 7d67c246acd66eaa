#pragma once

#include "fibretrans/core.hpp"

#include <string>
#include <vector>

namespace fibretrans {

/// A basis {E^{αi}} of N×(1+n) matrices, each stored in factored rank-one
/// form E^{αi} = E^α ⊗ E^{(α)i}. The first `adapted_rows()` rows are the
/// Π-adapted ones; flat index of (α, i) is α(1+n) + i.
class MatrixFrame {
public:
    MatrixFrame(int N, int n, int adapted_rows, std::vector<Vec> left, std::vector<std::vector<Vec>> right)
        : N_(N), n_(n), d_(adapted_rows), left_(std::move(left)), right_(std::move(right)) {
        require(static_cast<int>(left_.size()) == N_ && static_cast<int>(right_.size()) == N_,
                ErrorCode::DimensionMismatch, "frame needs N row factors");
        for (int a = 0; a < N_; ++a) {
            require(left_[a].size() == N_, ErrorCode::DimensionMismatch, "left factor must have length N");
            require(static_cast<int>(right_[a].size()) == 1 + n_, ErrorCode::DimensionMismatch,
                    "each row needs 1+n right factors");
            for (const auto& r : right_[a])
                require(r.size() == 1 + n_, ErrorCode::DimensionMismatch, "right factor must have length 1+n");
        }
        stacked_ = Mat(dim(), dim());
        for (int a = 0; a < N_; ++a)
            for (int i = 0; i <= n_; ++i) stacked_.col(index(a, i)) = vectorize(element(a, i));
        Eigen::JacobiSVD<Mat> svd(stacked_);
        const Vec& s = svd.singularValues();
        condition_ = s(s.size() - 1) > 0.0 ? s(0) / s(s.size() - 1) : std::numeric_limits<double>::infinity();
        if (condition_ > 1e8)
            warnings_.push_back("frame condition number " + std::to_string(condition_) + " exceeds 1e8");
    }

    /// e^α ⊗ e^i
    static MatrixFrame standard(int N, int n) {
        std::vector<Vec> left;
        std::vector<std::vector<Vec>> right;
        for (int a = 0; a < N; ++a) {
            left.push_back(Vec::Unit(N, a));
            std::vector<Vec> row;
            for (int i = 0; i <= n; ++i) row.push_back(Vec::Unit(1 + n, i));
            right.push_back(std::move(row));
        }
        return MatrixFrame(N, n, 0, std::move(left), std::move(right));
    }

    int N() const { return N_; }
    int n() const { return n_; }
    int dim() const { return N_ * (1 + n_); }
    int adapted_rows() const { return d_; }
    int index(int alpha, int i) const { return alpha * (1 + n_) + i; }

    const Vec& left(int alpha) const { return left_[alpha]; }
    const Vec& right(int alpha, int i) const { return right_[alpha][i]; }

    SpaceTimeMatrix element(int alpha, int i) const { return left_[alpha] * right_[alpha][i].transpose(); }
    SpaceTimeMatrix element(int flat) const { return element(flat / (1 + n_), flat % (1 + n_)); }

    /// K×K matrix whose column index(α,i) is vectorize(E^{αi}).
    const Mat& stacked() const { return stacked_; }
    Mat gram() const { return stacked_.transpose() * stacked_; }
    double condition_number() const { return condition_; }
    const std::vector<std::string>& warnings() const { return warnings_; }

private:
    int N_;
    int n_;
    int d_;
    std::vector<Vec> left_;
    std::vector<std::vector<Vec>> right_;
    Mat stacked_;
    double condition_ = 1.0;
    std::vector<std::string> warnings_;
};

}  // namespace fibretrans
