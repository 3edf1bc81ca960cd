#include "qfilt/heterodyne.hpp"

namespace qfilt {

double het_intensity(const PureState& state, const SystemModel& m, double t) {
    return jump_intensity(state, m, t);
}

double het_intensity(const DensityMatrix& rho, const SystemModel& m, double t) {
    return jump_intensity(rho, m, t);
}

PureState het_apply_jump(const PureState& state, const SystemModel& m, double t) {
    return apply_jump(state, m, t);
}

HeterodyneTrajectory simulate_heterodyne(const SystemModel& m,
                                         const TrajectoryParams& params) {
    return simulate_counting(m, params);
}

double default_heterodyne_dt(double epsilon) {
    if (!(epsilon > 0.0)) {
        throw std::invalid_argument("default_heterodyne_dt: epsilon must be > 0");
    }
    return epsilon * epsilon / 20.0;
}

}  // namespace qfilt
