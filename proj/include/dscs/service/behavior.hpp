#ifndef DSCS_SERVICE_BEHAVIOR_HPP
#define DSCS_SERVICE_BEHAVIOR_HPP

#include "dscs/crypto/digest.hpp"
#include "dscs/vector.hpp"

// Misbehaving-server knobs. The default is honest; anything else turns the
// service into a test double for adversarial experiments.

namespace dscs::service {

struct Behavior {
    bool drop_updates = false;      // ack with a proof but change nothing
    bool misplace_updates = false;  // apply at a neighbouring position
    bool serve_stale = false;       // answer with the version before the last modify
    double corrupt_fraction = 0;    // each block independently corrupted with this probability
    std::uint64_t seed = 0;

    bool honest() const { return !drop_updates && !misplace_updates && !serve_stale && corrupt_fraction <= 0; }

    bool corrupted(ByteView fid, std::uint64_t i) const {
        if (corrupt_fraction <= 0) return false;
        if (corrupt_fraction >= 1) return true;
        auto d = Hasher().update_u64(seed).update(fid).update_u64(i).finish();
        std::uint64_t x = 0;
        for (int k = 0; k < 8; ++k) x = (x << 8) | d[k];
        return static_cast<double>(x) / 18446744073709551616.0 < corrupt_fraction;
    }

    /// A copy that differs in the first segment and stays in range.
    static DataBlock corrupt(DataBlock v) {
        if (!v.empty()) v[0] = v[0] == 0 ? BigInt(1) : BigInt(v[0] - 1);
        return v;
    }
};

} // namespace dscs::service

#endif // DSCS_SERVICE_BEHAVIOR_HPP
