#include <doctest.h>

#include <cmath>
#include <set>

#include "fixtures.hpp"
#include "modsr/error.hpp"
#include "modsr/synth.hpp"

using namespace modsr;

TEST_CASE("scene generation is deterministic in the seed") {
    const SceneSpec spec = fixtures::small_scene(2, 5);
    const Scene a = generate_scene(spec);
    const Scene b = generate_scene(spec);
    CHECK(a.image.data() == b.image.data());
    CHECK(a.crack_mask == b.crack_mask);
    const Scene c = generate_scene(fixtures::small_scene(2, 6));
    CHECK(a.crack_mask != c.crack_mask);
}

TEST_CASE("untextured scene without busbars or cracks has two levels") {
    SceneSpec spec = fixtures::small_scene();
    spec.texture_amplitude = 0.0;
    spec.busbar_count = 0;
    spec.crack_count = 0;
    const Scene s = generate_scene(spec);
    std::set<double> levels(s.image.data().begin(), s.image.data().end());
    CHECK(levels == std::set<double>{spec.gap_level, spec.cell_level});
}

TEST_CASE("cracks form separate components") {
    for (std::uint64_t seed : {1u, 2u, 3u}) {
        const SceneSpec spec = fixtures::small_scene(3, seed);
        const Scene s = generate_scene(spec);
        CHECK(s.cracks.size() == 3);
        CHECK(count_components(s.crack_mask, spec.hr.width(), spec.hr.height()) == 3);
        for (std::size_t k = 0; k < s.crack_mask.size(); ++k)
            if (s.crack_mask[k]) CHECK(s.image[k] == spec.crack_level);
    }
}

TEST_CASE("component counting") {
    const std::vector<std::uint8_t> m = {1, 0, 0, 1,
                                         0, 1, 0, 1,
                                         0, 0, 0, 0,
                                         1, 1, 0, 1};
    CHECK(count_components(m, 4, 4) == 4);
}

TEST_CASE("scene validation") {
    SceneSpec spec = fixtures::small_scene();
    spec.crack_count = 13;
    CHECK_THROWS_AS(generate_scene(spec), ConfigError);
    spec = fixtures::small_scene();
    spec.texture_amplitude = 1.5;
    CHECK_THROWS_AS(generate_scene(spec), ConfigError);
}

TEST_CASE("sequence frames differ and match the truth correspondences") {
    const SceneSpec spec = fixtures::small_scene();
    const Scene scene = generate_scene(spec);
    const AcquisitionSpec acq = fixtures::small_acquisition(4);
    const Sequence seq = generate_sequence(scene.image, spec, acq);
    REQUIRE(seq.frames.size() == 4);
    for (std::size_t i = 0; i < 4; ++i)
        for (std::size_t j = i + 1; j < 4; ++j) CHECK(seq.frames[i].data() != seq.frames[j].data());
    CHECK(seq.correspondences.size() == 4);
    CHECK(seq.correspondences[0].pairs.size() == cell_corners(spec).size());
    CHECK(cell_corners(spec).size() == 20);
    for (const auto& set : seq.correspondences)
        for (const auto& c : set.pairs) {
            const PixelPoint u = forward_map(c.module, seq.truth.homographies[set.frame_index], seq.truth.camera);
            CHECK(std::hypot(u.u - c.pixel.u, u.v - c.pixel.v) < 1e-12);
            CHECK(c.pixel.u >= acq.margin);
            CHECK(c.pixel.u <= acq.lr_width - 1 - acq.margin);
        }
    const Sequence again = generate_sequence(scene.image, spec, acq);
    CHECK(again.frames[2].data() == seq.frames[2].data());
}

TEST_CASE("image noise has the requested standard deviation") {
    const SceneSpec spec = fixtures::small_scene();
    const Scene scene = generate_scene(spec);
    AcquisitionSpec acq = fixtures::small_acquisition(3);
    const Sequence clean = generate_sequence(scene.image, spec, acq);
    acq.noise.gaussian_sigma = 0.02;
    const Sequence noisy = generate_sequence(scene.image, spec, acq);
    double ss = 0.0;
    std::size_t n = 0;
    for (std::size_t i = 0; i < 3; ++i)
        for (std::size_t k = 0; k < clean.frames[i].size(); ++k) {
            const double d = noisy.frames[i][k] - clean.frames[i][k];
            ss += d * d;
            ++n;
        }
    CHECK(std::abs(std::sqrt(ss / n) / 0.02 - 1.0) < 0.1);
    acq.noise.gaussian_sigma = -0.1;
    CHECK_THROWS_AS(generate_sequence(scene.image, spec, acq), ConfigError);
}

TEST_CASE("correspondence perturbation") {
    std::vector<CorrespondenceSet> sets(5);
    for (int i = 0; i < 5; ++i) {
        sets[i].frame_index = i;
        for (int k = 0; k < 200; ++k) sets[i].pairs.push_back({{double(k), 1.0}, {10.0 * k, 5.0}});
    }
    const auto p = perturb_correspondences(sets, 0.5, 3);
    double ss = 0.0;
    std::size_t n = 0;
    for (int i = 0; i < 5; ++i)
        for (std::size_t k = 0; k < 200; ++k) {
            CHECK(p[i].pairs[k].module.y1 == sets[i].pairs[k].module.y1);
            const double du = p[i].pairs[k].pixel.u - sets[i].pairs[k].pixel.u;
            const double dv = p[i].pairs[k].pixel.v - sets[i].pairs[k].pixel.v;
            ss += du * du + dv * dv;
            n += 2;
        }
    CHECK(std::abs(std::sqrt(ss / n) / 0.5 - 1.0) < 0.2);
    CHECK_THROWS_AS(perturb_correspondences(sets, -1.0, 3), ConfigError);
    const auto same = perturb_correspondences(sets, 0.0, 3);
    CHECK(same[2].pairs[7].pixel.u == sets[2].pairs[7].pixel.u);
}

TEST_CASE("acquisition validation") {
    const SceneSpec spec = fixtures::small_scene();
    const Scene scene = generate_scene(spec);
    AcquisitionSpec acq = fixtures::small_acquisition(0);
    CHECK_THROWS_AS(generate_sequence(scene.image, spec, acq), ConfigError);
    acq = fixtures::small_acquisition(1);
    acq.lr_width = 20;
    CHECK_THROWS_AS(generate_sequence(scene.image, spec, acq), ConfigError);
    CHECK_THROWS_AS(generate_sequence(ImageGrid(5, 5), spec, fixtures::small_acquisition(1)), DataError);
}
