#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <string>
#include <vector>

#include "meanrev/panel.hpp"

namespace meanrev {

// Parameters of the Gaussian factor process used to simulate a price panel.
// Each session leg (previous close to open, open to close) draws an
// independent return vector
//     r_i = chi_i + sum_a omega_raw(i,a) * f_a
// with chi_i ~ N(0, xi_i^2) independent across names and f ~ N(0, phi).
struct SyntheticSpec {
    Eigen::VectorXd xi;         // N specific risks, all > 0
    Eigen::MatrixXd omega_raw;  // N x K factor loadings (K may be 0)
    Eigen::MatrixXd phi;        // K x K factor covariance, positive definite
    Eigen::Index num_dates = 0;
    std::uint64_t seed = 0;
    double base_price = 100.0;

    void validate() const;
};

// Simulates a complete panel: tickers T0000.., ISO dates ending 2019-12-31,
// prices compounded chronologically from base_price, volumes drawn around a
// per-ticker liquidity scale. Unadjusted prices equal adjusted ones (no
// corporate actions are simulated). The same spec yields a bit-identical
// panel on every call.
PricePanel generate_synthetic_panel(const SyntheticSpec& spec);

// A spec plus the cluster assignment used when loadings were requested in
// cluster form; `cluster` is empty when loadings were given explicitly.
struct SyntheticConfig {
    SyntheticSpec spec;
    std::vector<int> cluster;
};

// Reads a key-value spec file. Keys:
//   n, k, dates, seed          counts and RNG seed
//   base_price                 optional, default 100
//   xi                         one value (uniform) or n comma-separated values
//   phi                        one value v (v * identity) or 'A,B,v; A,B,v; ...'
//   omega                      'clusters' (binary, n/k names per cluster, in
//                              ticker order), 'none' (k must be 0), or
//                              'i,A,v; i,A,v; ...' triplets
SyntheticConfig load_synthetic_config(const std::string& path);

// Classification whose sector/industry/subindustry all equal the ticker's
// cluster label (SEC03/IND03/SUB03 for cluster 3). Tickers without a cluster
// (empty assignment) all share cluster 0.
ClassificationMap synthetic_classification(const std::vector<std::string>& tickers,
                                           const std::vector<int>& cluster);

}  // namespace meanrev
