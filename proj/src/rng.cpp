#include "mcqa/rng.hpp"

#include <numeric>

namespace mcqa {

std::vector<int> identity_permutation(int k) {
    std::vector<int> p(static_cast<std::size_t>(k));
    std::iota(p.begin(), p.end(), 0);
    return p;
}

std::vector<int> random_permutation(Rng& rng, int k) {
    std::vector<int> p = identity_permutation(k);
    rng.shuffle(p);
    return p;
}

}  // namespace mcqa
