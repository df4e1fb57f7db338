#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>

#include "ego/camera.hpp"
#include "ego/heatmap.hpp"
#include "ego/rng.hpp"

using namespace ego;

TEST_CASE("fisheye projection basics") {
  FisheyeCamera cam;
  cam.validate();
  SUBCASE("optical axis lands on the principal point") {
    auto pr = project(cam, Vec3(0, 0, 1.0));
    CHECK((pr.pixel - cam.principal_point).norm() < 1e-12);
    CHECK(pr.visible);
  }
  SUBCASE("point 90 degrees off axis maps to radius focal*pi/2") {
    auto pr = project(cam, Vec3(0.8, 0, 0));
    CHECK((pr.pixel - cam.principal_point).norm() ==
          doctest::Approx(cam.focal * M_PI / 2).epsilon(1e-12));
  }
  SUBCASE("beyond the fov the pixel is still returned, flagged invisible") {
    FisheyeCamera narrow = cam;
    narrow.fov = M_PI / 2;
    auto pr = project(narrow, Vec3(1.0, 0, 0.2));
    CHECK_FALSE(pr.visible);
    CHECK(std::isfinite(pr.pixel.x()));
  }
  SUBCASE("the camera center is an error") {
    CHECK_THROWS_AS(project(cam, Vec3::Zero()), NumericError);
  }
}

TEST_CASE("fisheye unprojection") {
  FisheyeCamera cam;
  SUBCASE("principal point gives the optical axis") {
    Vec3 d = unproject(cam, cam.principal_point);
    CHECK((d - Vec3(0, 0, 1)).norm() < 1e-12);
  }
  SUBCASE("round trip over 1000 random in-range pixels") {
    Rng rng = Rng::stream(9, "fisheye");
    const double max_r = cam.focal * cam.fov / 2;
    double worst = 0.0;
    for (int i = 0; i < 1000; ++i) {
      const double ang = rng.uniform(0.0, 2 * M_PI);
      const double rad = rng.uniform(0.0, max_r * 0.999);
      Vec2 px = cam.principal_point + rad * Vec2(std::cos(ang), std::sin(ang));
      Vec3 dir = unproject(cam, px);
      CHECK(dir.norm() == doctest::Approx(1.0).epsilon(1e-12));
      auto pr = project(cam, dir);
      worst = std::max(worst, (pr.pixel - px).norm());
    }
    CHECK(worst < 1e-6);
  }
  SUBCASE("radius exactly at the fov boundary") {
    Vec2 px = cam.principal_point + Vec2(cam.focal * cam.fov / 2, 0.0);
    Vec3 d = unproject(cam, px);
    const double theta = std::atan2(std::hypot(d.x(), d.y()), d.z());
    CHECK(theta == doctest::Approx(cam.fov / 2).epsilon(1e-9));
    Vec2 beyond = cam.principal_point + Vec2(cam.focal * cam.fov / 2 + 1.0, 0.0);
    CHECK_THROWS_AS(unproject(cam, beyond), NumericError);
  }
  SUBCASE("rotational symmetry about the optical axis") {
    Rng rng = Rng::stream(10, "rotsym");
    for (int i = 0; i < 100; ++i) {
      Vec3 p(rng.gaussian(), rng.gaussian(), rng.uniform(0.1, 2.0));
      const double ang = rng.uniform(0.0, 2 * M_PI);
      const Eigen::Matrix3d R = Eigen::AngleAxisd(ang, Vec3(0, 0, 1)).toRotationMatrix();
      auto a = project(cam, p);
      auto b = project(cam, R * p);
      const Vec2 da = a.pixel - cam.principal_point;
      const Vec2 db = b.pixel - cam.principal_point;
      const Vec2 rotated(std::cos(ang) * da.x() - std::sin(ang) * da.y(),
                         std::sin(ang) * da.x() + std::cos(ang) * da.y());
      CHECK((db - rotated).norm() < 1e-6);
    }
  }
  SUBCASE("pixel radius grows monotonically with theta") {
    double prev = -1.0;
    for (int i = 1; i < 60; ++i) {
      const double theta = i * (M_PI / 2) / 60.0;
      auto pr = project(cam, Vec3(std::sin(theta), 0, std::cos(theta)));
      const double rad = (pr.pixel - cam.principal_point).norm();
      CHECK(rad > prev);
      prev = rad;
    }
  }
}

TEST_CASE("mount jitter") {
  FisheyeCamera cam;
  SUBCASE("zero sigmas keep the camera unchanged") {
    FisheyeCamera j = jitter_mount(cam, 123, 0.0, 0.0);
    CHECK((j.mount_translation - cam.mount_translation).norm() == 0.0);
    CHECK(j.mount_rotation.angularDistance(cam.mount_rotation) == 0.0);
  }
  SUBCASE("deterministic per seed") {
    FisheyeCamera a = jitter_mount(cam, 99, 0.005, 0.03);
    FisheyeCamera b = jitter_mount(cam, 99, 0.005, 0.03);
    CHECK((a.mount_translation - b.mount_translation).norm() == 0.0);
    CHECK(a.mount_rotation.coeffs() == b.mount_rotation.coeffs());
  }
  SUBCASE("translation jitter matches its sigma within 10%") {
    const double sigma = 0.005;
    double acc = 0.0;
    const int n = 10000;
    for (int i = 0; i < n; ++i) {
      FisheyeCamera j = jitter_mount(cam, 1000 + static_cast<std::uint64_t>(i), sigma, 0.0);
      acc += j.mount_translation.squaredNorm();
    }
    const double est = std::sqrt(acc / (3.0 * n));
    CHECK(est == doctest::Approx(sigma).epsilon(0.10));
  }
}

TEST_CASE("heatmap rendering") {
  SUBCASE("joint at a cell center peaks at exactly 1") {
    Joints2D j;
    j.uv(0, 0) = 23.0;
    j.uv(0, 1) = 17.0;
    j.visible[0] = true;
    HeatmapStack hm = render(j, 2.0);
    CHECK(hm.channels[0](17, 23) == 1.0f);
    CHECK(hm.channels[0].maxCoeff() == 1.0f);
  }
  SUBCASE("invisible joint renders an all-zero channel") {
    Joints2D j;
    j.uv(3, 0) = 20.0;
    j.uv(3, 1) = 20.0;
    j.visible[3] = false;
    HeatmapStack hm = render(j, 2.0);
    CHECK(hm.channels[3].abs().maxCoeff() == 0.0f);
  }
  SUBCASE("channel sum approximates 2 pi sigma^2 for interior joints") {
    for (double sigma : {1.5, 2.0, 3.0}) {
      Joints2D j;
      j.uv(0, 0) = 24.0;
      j.uv(0, 1) = 22.0;
      j.visible[0] = true;
      HeatmapStack hm = render(j, sigma);
      const double total = hm.channels[0].cast<double>().sum();
      CHECK(total == doctest::Approx(2.0 * M_PI * sigma * sigma).epsilon(0.02));
    }
  }
  SUBCASE("values stay within [0,1] and the peak is 1 for visible joints") {
    Rng rng = Rng::stream(11, "render");
    for (int i = 0; i < 50; ++i) {
      Joints2D j;
      for (int c = 0; c < kNumHeatmapJoints; ++c) {
        j.uv(c, 0) = rng.uniform(0.0, 46.99);
        j.uv(c, 1) = rng.uniform(0.0, 46.99);
        j.visible[static_cast<std::size_t>(c)] = true;
      }
      HeatmapStack hm = render(j, 2.0);
      for (int c = 0; c < kNumHeatmapJoints; ++c) {
        CHECK(hm.channels[static_cast<std::size_t>(c)].minCoeff() >= 0.0f);
        CHECK(hm.channels[static_cast<std::size_t>(c)].maxCoeff() == 1.0f);
      }
    }
  }
  SUBCASE("integer translation covariance for interior joints") {
    Joints2D a, b;
    a.uv(0, 0) = 20.3;
    a.uv(0, 1) = 21.7;
    a.visible[0] = true;
    b = a;
    b.uv(0, 0) += 3.0;
    b.uv(0, 1) += 2.0;
    HeatmapStack ha = render(a, 2.0);
    HeatmapStack hb = render(b, 2.0);
    for (int r = 10; r < 35; ++r)
      for (int c = 10; c < 35; ++c)
        CHECK(ha.channels[0](r, c) == doctest::Approx(hb.channels[0](r + 2, c + 3)).epsilon(1e-6));
  }
}

TEST_CASE("heatmap decoding") {
  SUBCASE("decode(render(p)) within 0.25 px for interior joints") {
    Rng rng = Rng::stream(12, "decode");
    for (double sigma : {1.5, 2.0, 3.0}) {
      double worst = 0.0;
      for (int i = 0; i < 300; ++i) {
        Joints2D j;
        j.uv(0, 0) = rng.uniform(5.0, 42.0);
        j.uv(0, 1) = rng.uniform(5.0, 42.0);
        j.visible[0] = true;
        Decoded d = decode(render(j, sigma));
        CHECK(d.joints.visible[0]);
        worst = std::max(worst, (d.joints.uv.row(0) - j.uv.row(0)).norm());
      }
      CHECK(worst < 0.25);
    }
  }
  SUBCASE("all-zero channel decodes invisible with confidence 0") {
    Joints2D j;  // nothing visible
    Decoded d = decode(render(j, 2.0));
    for (int c = 0; c < kNumHeatmapJoints; ++c) {
      CHECK_FALSE(d.joints.visible[static_cast<std::size_t>(c)]);
      CHECK(d.confidence[static_cast<std::size_t>(c)] == 0.0);
    }
  }
  SUBCASE("equal peaks break ties toward the lowest linear index") {
    HeatmapStack hm(47);
    hm.channels[0](10, 10) = 0.8f;
    hm.channels[0](10, 30) = 0.8f;
    hm.channels[0](30, 10) = 0.8f;
    Decoded d = decode(hm);
    // row-major scan: (10,10) comes first
    CHECK(d.joints.uv(0, 0) == doctest::Approx(10.0));
    CHECK(d.joints.uv(0, 1) == doctest::Approx(10.0));
  }
}

TEST_CASE("heatmap resampling") {
  Joints2D j;
  j.uv(0, 0) = 18.4;
  j.uv(0, 1) = 25.6;
  j.visible[0] = true;
  HeatmapStack hm = render(j, 2.0);
  SUBCASE("same size is the identity") {
    HeatmapStack r = resample(hm, 47);
    for (int c = 0; c < kNumHeatmapJoints; ++c)
      CHECK((r.channels[static_cast<std::size_t>(c)] - hm.channels[static_cast<std::size_t>(c)])
                .abs()
                .maxCoeff() < 1e-6f);
  }
  SUBCASE("values remain in [0,1] and peak location is preserved") {
    for (int size : {8, 16, 24, 36, 48}) {
      HeatmapStack r = resample(hm, size);
      CHECK(r.channels[0].minCoeff() >= 0.0f);
      CHECK(r.channels[0].maxCoeff() <= 1.0f);
    }
    HeatmapStack r = resample(hm, 24);
    int pr = 0, pc = 0;
    r.channels[0].maxCoeff(&pr, &pc);
    const double scale = 46.0 / 23.0;  // align-corners back-mapping
    CHECK(std::abs(pc * scale - j.uv(0, 0)) < 1.0 * scale);
    CHECK(std::abs(pr * scale - j.uv(0, 1)) < 1.0 * scale);
  }
  SUBCASE("unsupported size is an error") {
    CHECK_THROWS_AS(resample(hm, 13), ConfigError);
  }
}

TEST_CASE("tensor packing round trip") {
  Rng rng = Rng::stream(14, "pack");
  Joints2D j;
  for (int c = 0; c < kNumHeatmapJoints; ++c) {
    j.uv(c, 0) = rng.uniform(3.0, 44.0);
    j.uv(c, 1) = rng.uniform(3.0, 44.0);
    j.visible[static_cast<std::size_t>(c)] = true;
  }
  HeatmapStack hm = render(j, 2.0);
  HeatmapStack back = from_tensor(to_tensor(hm));
  for (int c = 0; c < kNumHeatmapJoints; ++c)
    CHECK((back.channels[static_cast<std::size_t>(c)] -
           hm.channels[static_cast<std::size_t>(c)]).abs().maxCoeff() == 0.0f);
}
