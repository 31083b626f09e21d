#pragma once

#include <Eigen/Dense>
#include <string>
#include <vector>

namespace meanrev {

// Cross-sectional loadings: one row per instrument, one labelled column per
// explanatory variable (cluster membership, style exposure, intercept, ...).
struct LoadingsMatrix {
    Eigen::MatrixXd values;            // N x K
    std::vector<std::string> columns;  // K labels
    std::vector<bool> binary;          // per column: entries all 0/1

    Eigen::Index rows() const { return values.rows(); }
    Eigen::Index cols() const { return values.cols(); }
};

// Recomputes the per-column binary flags from the values.
void refresh_binary_flags(LoadingsMatrix& lm);

}  // namespace meanrev
