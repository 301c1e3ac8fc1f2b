#pragma once

#include <Eigen/Dense>

#include "dbl/market.hpp"

namespace dbl {

/// Bundled five-asset reference market (CAPM-style annual estimates) used by
/// the demo scenario, the verification suite and the tests: five risky
/// assets, a 3% risk-free rate and a one-year horizon.
inline MarketModel reference_market() {
    Eigen::VectorXd mu(5);
    mu << 0.0320, 0.0447, 0.0269, 0.0679, 0.0672;
    Eigen::MatrixXd sigma(5, 5);
    sigma << 0.0641, 0.0175, 0.0086, 0.0266, 0.0363,
             0.0175, 0.1191, 0.0234, 0.0303, 0.0353,
             0.0086, 0.0234, 0.1154, 0.0322, 0.0278,
             0.0266, 0.0303, 0.0322, 0.1230, 0.0431,
             0.0363, 0.0353, 0.0278, 0.0431, 0.1679;
    return MarketModel::make(mu, sigma, 0.03, 1.0);
}

/// Three views: two relative (asset 1 vs 2, asset 1 vs 5) and one absolute
/// (asset 3); no view touches asset 4.
inline Eigen::MatrixXd reference_pick_matrix() {
    Eigen::MatrixXd p(3, 5);
    p << 1, -1, 0, 0, 0,
         1, 0, 0, 0, -1,
         0, 0, 1, 0, 0;
    return p;
}

}  // namespace dbl
