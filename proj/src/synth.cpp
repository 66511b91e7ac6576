#include "popgo/synth.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <fstream>
#include <stdexcept>
#include <unordered_set>

#include "popgo/rng.hpp"

namespace popgo {

namespace {

constexpr char kTruthMagic[8] = {'P', 'O', 'P', 'G', 'O', 'T', 'R', 'U'};
constexpr double kItemLatentNorm = 2.4;

int draw_from_cdf(const std::vector<double>& cdf, Rng& rng) {
    const double x = rng.uniform() * cdf.back();
    auto it = std::upper_bound(cdf.begin(), cdf.end(), x);
    if (it == cdf.end()) --it;
    return static_cast<int>(it - cdf.begin());
}

std::uint64_t pair_key(int u, int i) {
    return (static_cast<std::uint64_t>(static_cast<std::uint32_t>(u)) << 32) |
           static_cast<std::uint32_t>(i);
}

}  // namespace

void SynthConfig::validate() const {
    if (n_users < 1 || n_items < 1 || latent_dim < 1 || interactions_per_user < 1) {
        throw std::invalid_argument("synth: counts must be positive");
    }
    if (conformity < 0.0 || conformity > 1.0) {
        throw std::invalid_argument("synth: conformity must be in [0, 1]");
    }
    if (zipf_exponent < 0.0) {
        throw std::invalid_argument("synth: zipf exponent must be >= 0");
    }
    if (interactions_per_user >= n_items) {
        throw std::invalid_argument("synth: interactions_per_user must be < n_items");
    }
}

SynthData generate(const SynthConfig& cfg) {
    cfg.validate();
    Rng rng(cfg.seed);
    const int nu = cfg.n_users;
    const int ni = cfg.n_items;

    std::vector<double> user_latent(static_cast<std::size_t>(nu) * cfg.latent_dim);
    std::vector<double> item_latent(static_cast<std::size_t>(ni) * cfg.latent_dim);
    for (double& v : user_latent) v = rng.normal();
    for (double& v : item_latent) v = rng.normal();
    // items get a common latent norm, so no item is globally favored and the
    // zero-conformity marginal stays uniform up to sampling noise
    for (int i = 0; i < ni; ++i) {
        double* vi = item_latent.data() + static_cast<std::size_t>(i) * cfg.latent_dim;
        double n2 = 0.0;
        for (int d = 0; d < cfg.latent_dim; ++d) n2 += vi[d] * vi[d];
        const double scale = kItemLatentNorm / std::sqrt(n2);
        for (int d = 0; d < cfg.latent_dim; ++d) vi[d] *= scale;
    }

    SynthData out;
    out.truth.resize(static_cast<std::size_t>(nu) * ni);
    for (int u = 0; u < nu; ++u) {
        double mx = -1e300;
        std::vector<double> logits(ni);
        for (int i = 0; i < ni; ++i) {
            double s = 0.0;
            for (int d = 0; d < cfg.latent_dim; ++d) {
                s += user_latent[static_cast<std::size_t>(u) * cfg.latent_dim + d] *
                     item_latent[static_cast<std::size_t>(i) * cfg.latent_dim + d];
            }
            logits[i] = s;
            mx = std::max(mx, s);
        }
        double z = 0.0;
        for (int i = 0; i < ni; ++i) {
            logits[i] = std::exp(logits[i] - mx);
            z += logits[i];
        }
        for (int i = 0; i < ni; ++i) {
            out.truth[static_cast<std::size_t>(u) * ni + i] = logits[i] / z;
        }
    }

    // Zipf exposure ranked against aggregate preference: the most exposed
    // items are the least liked on average, so the planted popularity signal
    // is purely spurious and vanishes when the exposure policy changes.
    std::vector<double> exposure(ni);
    {
        std::vector<double> aggregate(ni, 0.0);
        for (int u = 0; u < nu; ++u) {
            for (int i = 0; i < ni; ++i) {
                aggregate[i] += out.truth[static_cast<std::size_t>(u) * ni + i];
            }
        }
        std::vector<int> order(ni);
        for (int i = 0; i < ni; ++i) order[i] = i;
        std::sort(order.begin(), order.end(),
                  [&aggregate](int a, int b) { return aggregate[a] < aggregate[b]; });
        std::vector<int> rank_of(ni);
        for (int r = 0; r < ni; ++r) rank_of[order[r]] = r + 1;
        double zsum = 0.0;
        for (int i = 0; i < ni; ++i) {
            exposure[i] = std::pow(static_cast<double>(rank_of[i]), -cfg.zipf_exponent);
            zsum += exposure[i];
        }
        for (double& q : exposure) q /= zsum;
    }

    std::unordered_set<std::uint64_t> used;
    used.reserve(static_cast<std::size_t>(nu) * cfg.interactions_per_user * 2);

    // biased pool: preference/exposure mixture, distinct items per user
    std::vector<Interaction> pool;
    pool.reserve(static_cast<std::size_t>(nu) * cfg.interactions_per_user);
    std::vector<double> cdf(ni);
    for (int u = 0; u < nu; ++u) {
        double acc = 0.0;
        for (int i = 0; i < ni; ++i) {
            acc += (1.0 - cfg.conformity) * out.truth[static_cast<std::size_t>(u) * ni + i] +
                   cfg.conformity * exposure[i];
            cdf[i] = acc;
        }
        int taken = 0;
        while (taken < cfg.interactions_per_user) {
            int i = draw_from_cdf(cdf, rng);
            if (!used.insert(pair_key(u, i)).second) continue;
            pool.push_back({u, i, kNoTimestamp});
            ++taken;
        }
    }

    rng.shuffle(pool);
    const std::size_t b = pool.size();
    // pool is 80% of the total; 50/10/20 of the total = 62.5/12.5/25 of it
    const std::size_t n_train = static_cast<std::size_t>(std::llround(0.625 * static_cast<double>(b)));
    const std::size_t n_valid = static_cast<std::size_t>(std::llround(0.125 * static_cast<double>(b)));
    out.splits.kind = SplitKind::IdOod;
    out.splits.seed = cfg.seed;
    for (std::size_t p = 0; p < b; ++p) {
        if (p < n_train) {
            out.splits.train.push_back(pool[p]);
        } else if (p < n_train + n_valid) {
            out.splits.id_valid.push_back(pool[p]);
        } else {
            out.splits.id_test.push_back(pool[p]);
        }
    }

    // OOD test from the same truth: equal per-item quota (uniform exposure),
    // user of each slot drawn preference-proportionally
    const std::size_t t_ood = static_cast<std::size_t>(std::llround(0.25 * static_cast<double>(b)));
    std::vector<std::size_t> quota(ni, t_ood / ni);
    {
        std::size_t rem = t_ood - (t_ood / ni) * ni;
        std::vector<int> items(ni);
        for (int i = 0; i < ni; ++i) items[i] = i;
        rng.shuffle(items);
        for (std::size_t r = 0; r < rem; ++r) ++quota[items[r]];
    }
    // each slot picks its user by sharpened preference p^4: the OOD pairs are
    // the interactions a uniform exposure policy would most plausibly produce
    std::vector<double> user_cdf(nu);
    for (int i = 0; i < ni; ++i) {
        double acc = 0.0;
        for (int u = 0; u < nu; ++u) {
            const double p = out.truth[static_cast<std::size_t>(u) * ni + i];
            const double p2 = p * p;
            acc += p2 * p2;
            user_cdf[u] = acc;
        }
        for (std::size_t slot = 0; slot < quota[i]; ++slot) {
            int u = -1;
            for (int attempt = 0; attempt < 200; ++attempt) {
                int cand = draw_from_cdf(user_cdf, rng);
                if (!used.count(pair_key(cand, i))) {
                    u = cand;
                    break;
                }
            }
            if (u < 0) {
                // dense item: walk users from a random offset for a free pair
                int off = rng.uniform_int(nu);
                for (int step = 0; step < nu; ++step) {
                    int cand = (off + step) % nu;
                    if (!used.count(pair_key(cand, i))) {
                        u = cand;
                        break;
                    }
                }
            }
            if (u < 0) continue;  // every user already has this item
            used.insert(pair_key(u, i));
            out.splits.ood_test.push_back({u, i, kNoTimestamp});
        }
    }

    // union dataset with every user/item registered, ids equal to synth ids
    InteractionDataset& ds = out.dataset;
    ds.n_users = nu;
    ds.n_items = ni;
    ds.user_tokens.reserve(nu);
    ds.item_tokens.reserve(ni);
    for (int u = 0; u < nu; ++u) {
        ds.user_tokens.push_back("u" + std::to_string(u));
        ds.user_ids.emplace(ds.user_tokens.back(), u);
    }
    for (int i = 0; i < ni; ++i) {
        ds.item_tokens.push_back("i" + std::to_string(i));
        ds.item_ids.emplace(ds.item_tokens.back(), i);
    }
    auto append = [&ds](const std::vector<Interaction>& list) {
        ds.interactions.insert(ds.interactions.end(), list.begin(), list.end());
    };
    append(out.splits.train);
    append(out.splits.id_valid);
    append(out.splits.id_test);
    append(out.splits.ood_test);
    ds.user_items = adjacency_from(ds.interactions, nu);
    return out;
}

void save_truth(const std::string& path, int n_users, int n_items,
                const std::vector<double>& truth) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw std::runtime_error("cannot write " + path);
    out.write(kTruthMagic, sizeof(kTruthMagic));
    std::uint32_t dims[2] = {static_cast<std::uint32_t>(n_users),
                             static_cast<std::uint32_t>(n_items)};
    out.write(reinterpret_cast<const char*>(dims), sizeof(dims));
    out.write(reinterpret_cast<const char*>(truth.data()),
              static_cast<std::streamsize>(truth.size() * sizeof(double)));
}

std::vector<double> load_truth(const std::string& path, int* n_users_out, int* n_items_out) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw std::runtime_error("cannot open " + path);
    char magic[8];
    in.read(magic, sizeof(magic));
    if (!in || std::memcmp(magic, kTruthMagic, sizeof(magic)) != 0) {
        throw std::runtime_error(path + ": not a truth matrix file");
    }
    std::uint32_t dims[2];
    in.read(reinterpret_cast<char*>(dims), sizeof(dims));
    if (!in) throw std::runtime_error(path + ": truncated header");
    std::vector<double> truth(static_cast<std::size_t>(dims[0]) * dims[1]);
    in.read(reinterpret_cast<char*>(truth.data()),
            static_cast<std::streamsize>(truth.size() * sizeof(double)));
    if (!in) throw std::runtime_error(path + ": truncated matrix");
    if (n_users_out) *n_users_out = static_cast<int>(dims[0]);
    if (n_items_out) *n_items_out = static_cast<int>(dims[1]);
    return truth;
}

}  // namespace popgo
