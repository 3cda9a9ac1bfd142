#include <gtest/gtest.h>

#include <cmath>
#include <numeric>

#include "eknit/sim/reference.hpp"
#include "eknit/topology/graph.hpp"
#include "eknit/topology/layout_io.hpp"
#include "eknit/topology/misalignment.hpp"
#include "layouts.hpp"

using namespace eknit;
using namespace eknit::topology;

namespace {

// Plain union-find over whole groups and whole strips. Without cuts a thread
// is continuous, so a group (or strip) is a single conductor.
struct Dsu {
    std::vector<std::size_t> p;
    explicit Dsu(std::size_t n) : p(n) { std::iota(p.begin(), p.end(), 0); }
    std::size_t find(std::size_t x) { return p[x] == x ? x : p[x] = find(p[x]); }
    void unite(std::size_t a, std::size_t b) { p[find(a)] = find(b); }
};

bool oracle_connected(const GarmentLayout& l, std::size_t site_a, std::size_t site_b, Channel ch) {
    const std::size_t ng = l.groups().size();
    Dsu d(ng + l.strips().size());
    for (const auto& j : l.junctions()) {
        if (j.channel == ch && l.junction_connected(j)) d.unite(j.group, ng + j.strip);
    }
    return d.find(l.site_group(site_a)) == d.find(l.site_group(site_b));
}

// Effective resistance by Gaussian elimination on the grounded Laplacian.
std::optional<double> oracle_resistance(const ChannelNetwork& net, std::size_t a, std::size_t b) {
    if (a == b) return 0.0;
    if (!net.connected(a, b)) return std::nullopt;
    std::vector<std::size_t> nodes;
    for (std::size_t n = 0; n < net.node_count(); ++n) {
        if (net.component(n) == net.component(a) && n != b) nodes.push_back(n);
    }
    const std::size_t m = nodes.size();
    std::vector<long> idx(net.node_count(), -1);
    for (std::size_t i = 0; i < m; ++i) idx[nodes[i]] = static_cast<long>(i);
    std::vector<std::vector<double>> L(m, std::vector<double>(m + 1, 0.0));
    for (const auto& e : net.edges()) {
        const double g = 1.0 / e.ohm;
        const long ia = idx[e.a], ib = idx[e.b];
        if (ia >= 0) L[ia][ia] += g;
        if (ib >= 0) L[ib][ib] += g;
        if (ia >= 0 && ib >= 0) {
            L[ia][ib] -= g;
            L[ib][ia] -= g;
        }
    }
    L[idx[a]][m] = 1.0;
    for (std::size_t c = 0; c < m; ++c) {
        std::size_t piv = c;
        for (std::size_t r = c + 1; r < m; ++r) {
            if (std::abs(L[r][c]) > std::abs(L[piv][c])) piv = r;
        }
        std::swap(L[c], L[piv]);
        for (std::size_t r = 0; r < m; ++r) {
            if (r == c || L[r][c] == 0.0) continue;
            const double f = L[r][c] / L[c][c];
            for (std::size_t k = c; k <= m; ++k) L[r][k] -= f * L[c][k];
        }
    }
    const auto ia = static_cast<std::size_t>(idx[a]);
    return L[ia][m] / L[ia][ia];
}

GarmentLayout ladder(std::vector<double> strip_xs) {
    // Two rows 20 cm apart, sites at x 0 and x 30, strips between them.
    std::vector<VerticalStrip> strips;
    for (std::size_t i = 0; i < strip_xs.size(); ++i) strips.push_back({"s" + std::to_string(i), strip_xs[i], {"top", "bottom"}, 0.0});
    return GarmentLayout({{"top", 0.0, 0.0, 30.0, 0.0}, {"bottom", 20.0, 0.0, 30.0, 0.0}}, strips,
                         {{"a", "top", 0.0}, {"b", "bottom", 30.0}}, 1.0, 20.0);
}

}  // namespace

TEST(Layout, RejectsSiteOnUnknownGroup) {
    EXPECT_THROW(GarmentLayout({{"g", 0, 0, 10, 0}}, {}, {{"s", "nope", 1}}), ValidationError);
}

TEST(Layout, RejectsSiteOutsideGroupExtent) {
    EXPECT_THROW(GarmentLayout({{"g", 0, 0, 10, 0}}, {}, {{"s", "g", 11}}), ValidationError);
}

TEST(Layout, JunctionsEnumeratedCanonically) {
    const auto l = ladder({10.0, 20.0});
    ASSERT_EQ(l.junctions().size(), 2u * 2u * 6u);
    EXPECT_EQ(l.junctions()[0].strip, 0u);
    EXPECT_EQ(l.junctions()[0].channel, Channel::Vcc);
    EXPECT_EQ(l.junctions()[5].channel, Channel::Gnd);
    EXPECT_EQ(l.junctions()[6].group, 1u);
    EXPECT_EQ(l.junctions()[12].strip, 1u);
}

TEST(Layout, JsonRoundTrip) {
    const auto l = eknit::testing::random_layout(3);
    EXPECT_EQ(load_layout(save_layout(l)), l);
    EXPECT_EQ(load_layout(save_layout(sim::reference_layout())), sim::reference_layout());
}

TEST(Layout, TruncatedJsonIsMalformed) {
    const auto text = save_layout(sim::reference_layout());
    EXPECT_THROW(load_layout(text.substr(0, text.size() / 2)), MalformedError);
}

TEST(Layout, MissingFileIsIoError) {
    EXPECT_THROW(load_layout_file("/nonexistent/layout.json"), IoError);
}

TEST(Graph, ConnectivityMatchesUnionFind) {
    for (std::uint64_t seed = 0; seed < 60; ++seed) {
        const auto l = eknit::testing::random_layout(seed, 5, 4, 0.3);
        const ConductanceGraph g(l);
        for (Channel ch : kAllChannels) {
            const auto& net = g.channel(ch);
            for (std::size_t a = 0; a < l.sites().size(); ++a) {
                for (std::size_t b = 0; b < l.sites().size(); ++b) {
                    EXPECT_EQ(net.connected(net.site_node(a), net.site_node(b)), oracle_connected(l, a, b, ch))
                        << "seed " << seed << " sites " << a << "," << b;
                }
            }
        }
    }
}

TEST(Graph, SingleStripIsSeriesPath) {
    // a -> strip at x 10 (10 cm), down 20 cm, along to x 30 (20 cm): 0.5 m at 20 ohm/m.
    const ConductanceGraph g(ladder({10.0}));
    EXPECT_NEAR(*path_resistance(g, "a", "b", Channel::SdaP), 10.0, 1e-12);
}

TEST(Graph, TwoStripsAtSameXAreParallel) {
    // Coincident strips: the vertical legs (0.2 m, 4 ohm each) halve.
    const ConductanceGraph g(ladder({10.0, 10.0}));
    EXPECT_NEAR(*path_resistance(g, "a", "b", Channel::Vcc), 0.3 * 20.0 + 2.0, 1e-12);
}

TEST(Graph, TwoStripsSeriesParallel) {
    // Strips at x 10 and x 20. Top: a-(2)-n1-(2)-n2 ; bottom: m1-(2)-m2-(2)-b ;
    // legs n1-m1 and n2-m2 of 4 ohm. Bridge between n1 and m2 has the
    // structure of a 2+4 / 4+2 parallel loop: R = 2 + (6*6)/12 + 2 = 7.
    const ConductanceGraph g(ladder({10.0, 20.0}));
    EXPECT_NEAR(*path_resistance(g, "a", "b", Channel::Gnd), 7.0, 1e-12);
}

TEST(Graph, OpenJunctionRemovesLeg) {
    auto l = ladder({10.0, 20.0});
    const auto j = *l.junction_index(1, 0, Channel::SclN);
    const ConductanceGraph g(l.with_junction_offset(j, 3.0));
    EXPECT_NEAR(*path_resistance(g, "a", "b", Channel::SclN), 10.0, 1e-12);
    EXPECT_NEAR(*path_resistance(g, "a", "b", Channel::SclP), 7.0, 1e-12);
}

TEST(Graph, DisconnectedGivesNullopt) {
    auto l = ladder({10.0});
    const ConductanceGraph g(l.with_junction_offset(*l.junction_index(0, 1, Channel::Vcc), -2.0));
    EXPECT_FALSE(path_resistance(g, "a", "b", Channel::Vcc).has_value());
    EXPECT_FALSE(g.fully_connected(0, 1));
    EXPECT_DOUBLE_EQ(reachable_fraction(g, "a"), 0.5);
}

TEST(Graph, ResistanceTableMatchesGaussianElimination) {
    for (std::uint64_t seed = 100; seed < 140; ++seed) {
        const auto l = eknit::testing::random_layout(seed, 6, 4, 0.15);
        const ConductanceGraph g(l);
        for (Channel ch : {Channel::Vcc, Channel::SdaN}) {
            const auto& net = g.channel(ch);
            const ResistanceTable table(net);
            for (std::size_t a = 0; a < l.sites().size(); ++a) {
                for (std::size_t b = a; b < l.sites().size(); ++b) {
                    const auto got = table.between(net.site_node(a), net.site_node(b));
                    const auto want = oracle_resistance(net, net.site_node(a), net.site_node(b));
                    ASSERT_EQ(got.has_value(), want.has_value());
                    if (want) EXPECT_NEAR(*got, *want, 1e-9 * std::max(1.0, *want));
                }
            }
        }
    }
}

TEST(Graph, ResistanceIsAMetric) {
    const auto l = eknit::testing::random_layout(7, 5, 5, 0.0);
    const ConductanceGraph g(l);
    const auto& net = g.channel(Channel::SdaP);
    const ResistanceTable t(net);
    const auto n = l.sites().size();
    for (std::size_t a = 0; a < n; ++a) {
        EXPECT_NEAR(*t.between(net.site_node(a), net.site_node(a)), 0.0, 1e-12);
        for (std::size_t b = 0; b < n; ++b) {
            const double ab = *t.between(net.site_node(a), net.site_node(b));
            EXPECT_NEAR(ab, *t.between(net.site_node(b), net.site_node(a)), 1e-9);
            for (std::size_t c = 0; c < n; ++c) {
                EXPECT_LE(ab, *t.between(net.site_node(a), net.site_node(c)) +
                                  *t.between(net.site_node(c), net.site_node(b)) + 1e-9);
            }
        }
    }
}

// Cutting conductors can only raise effective resistance.
TEST(Graph, RayleighMonotonicityUnderCuts) {
    for (std::uint64_t seed = 200; seed < 260; ++seed) {
        const auto l = eknit::testing::random_layout(seed, 5, 5, 0.1);
        Rng rng(seed);
        const auto g = l.groups()[static_cast<std::size_t>(rng.uniform() * 5)].id;
        const double x0 = 100.0 * rng.uniform();
        const OpenCut cut{Channel::SclP, {g, x0, x0 + 5.0}};
        const ConductanceGraph before(l);
        const ConductanceGraph after(l, std::span(&cut, 1));
        for (std::size_t a = 0; a < l.sites().size(); ++a) {
            for (std::size_t b = a + 1; b < l.sites().size(); ++b) {
                const auto r0 = path_resistance(before, l.sites()[a].id, l.sites()[b].id, Channel::SclP);
                const auto r1 = path_resistance(after, l.sites()[a].id, l.sites()[b].id, Channel::SclP);
                if (!r0) {
                    EXPECT_FALSE(r1);
                } else if (r1) {
                    EXPECT_GE(*r1, *r0 - 1e-9) << "seed " << seed;
                }
            }
        }
    }
}

TEST(Graph, ShortestRouteLengthMatchesPathLength) {
    const auto l = sim::reference_layout();
    const ConductanceGraph g(l);
    const auto& net = g.channel(Channel::SdaP);
    const auto hub = net.site_node(l.require_site(sim::kReferenceHub));
    for (std::size_t s = 0; s < l.sites().size(); ++s) {
        const auto route = net.shortest_route(net.site_node(s), hub);
        ASSERT_TRUE(route);
        double len = 0.0;
        for (auto e : *route) len += net.edges()[e].length_m;
        EXPECT_NEAR(len, *net.path_length_m(net.site_node(s), hub), 1e-12);
    }
}

TEST(ReferenceLayout, WristToHubIsAboutOnePointFiveMetres) {
    const auto l = sim::reference_layout();
    const ConductanceGraph g(l);
    const auto& net = g.channel(Channel::SdaP);
    const double len = *net.path_length_m(net.site_node(l.require_site("l_wrist")),
                                          net.site_node(l.require_site(sim::kReferenceHub)));
    EXPECT_NEAR(len, 1.5, 0.05);
    EXPECT_DOUBLE_EQ(reachable_fraction(g, sim::kReferenceHub), 1.0);
}

TEST(Misalignment, SameSeedSameLayout) {
    const auto l = sim::reference_layout();
    EXPECT_EQ(sample_misalignment(l, 0.7, 1.0, 42), sample_misalignment(l, 0.7, 1.0, 42));
    EXPECT_NE(sample_misalignment(l, 0.7, 1.0, 42), sample_misalignment(l, 0.7, 1.0, 43));
}

TEST(Misalignment, OffsetsScaleWithSigma) {
    const auto l = sim::reference_layout();
    const auto a = sample_misalignment(l, 0.5, 1.0, 9);
    const auto b = sample_misalignment(l, 1.5, 1.0, 9);
    for (std::size_t i = 0; i < a.junctions().size(); ++i) {
        EXPECT_NEAR(b.junctions()[i].offset_mm, 3.0 * a.junctions()[i].offset_mm, 1e-12);
    }
}

TEST(Misalignment, ZeroSigmaDisconnectsNothing) {
    MisalignmentOptions opt;
    opt.n_seeds = 20;
    EXPECT_EQ(mean_disconnected_fraction(sim::reference_layout(), sim::kReferenceHub, 0.0, 1.0, opt), 0.0);
}

// Fraction of junctions out of tolerance is a Gaussian tail probability.
TEST(Misalignment, JunctionFractionMatchesGaussianTail) {
    const auto l = sim::reference_layout();
    MisalignmentOptions opt;
    opt.n_seeds = 200;
    opt.metric = DisconnectionMetric::Junctions;
    for (double sigma : {0.4, 0.8, 1.5}) {
        const double p = std::erfc(1.0 / (sigma * std::sqrt(2.0)));
        const double n = static_cast<double>(opt.n_seeds * l.junctions().size());
        const double se = std::sqrt(p * (1.0 - p) / n);
        EXPECT_NEAR(mean_disconnected_fraction(l, sim::kReferenceHub, sigma, 1.0, opt), p, 4.0 * se + 1e-4)
            << "sigma " << sigma;
    }
}

TEST(Misalignment, MeanIsMonotoneInSigmaForFixedSeeds) {
    const auto l = sim::reference_layout();
    MisalignmentOptions opt;
    opt.n_seeds = 50;
    double prev = 0.0;
    for (double sigma = 0.2; sigma < 2.0; sigma += 0.2) {
        const double m = mean_disconnected_fraction(l, sim::kReferenceHub, sigma, 1.0, opt);
        EXPECT_GE(m, prev);
        prev = m;
    }
}

TEST(Misalignment, UnreachableTargetThrows) {
    MisalignmentOptions opt;
    opt.n_seeds = 10;
    const auto l = sim::reference_layout();
    const double max = max_disconnected_fraction(l, sim::kReferenceHub);
    EXPECT_THROW(calibrate_misalignment_sigma(l, sim::kReferenceHub, max + 0.1, 1.0, opt), CalibrationError);
}
