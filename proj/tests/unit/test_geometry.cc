#include <cmath>

#include <doctest.h>

#include "dpe_mvs/geometry.h"
#include "test_util.h"

using namespace dpe;
using dpe::test::MatrixProject;
using dpe::test::RandomCamera;
using dpe::test::SimpleCamera;
using dpe::test::WorldRayDirection;

TEST_CASE("point on the optical axis projects to the principal point") {
  const CameraModel cam = SimpleCamera();
  const Projection p = Project({0, 0, 5}, cam);
  CHECK(p.pixel.x() == doctest::Approx(cam.cx));
  CHECK(p.pixel.y() == doctest::Approx(cam.cy));
  CHECK(p.depth == doctest::Approx(5.0));
}

TEST_CASE("project and unproject are inverse") {
  Rng rng(11);
  for (int i = 0; i < 1000; ++i) {
    const CameraModel cam = RandomCamera(rng);
    const Eigen::Vector2d pixel(UniformRange(rng, 0, 639), UniformRange(rng, 0, 479));
    const double depth = UniformRange(rng, 0.5, 50);
    const Eigen::Vector3d x = Unproject(pixel, depth, cam);
    const Projection back = Project(x, cam);
    CHECK((back.pixel - pixel).norm() < 1e-9 * pixel.norm());
    CHECK(std::abs(back.depth - depth) < 1e-9 * depth);
    const Eigen::Vector3d again = Unproject(back.pixel, back.depth, cam);
    CHECK((again - x).norm() < 1e-9 * std::max(1.0, x.norm()));
  }
}

TEST_CASE("projection matches an explicit matrix product") {
  Rng rng(12);
  for (int i = 0; i < 200; ++i) {
    const CameraModel cam = RandomCamera(rng);
    const Eigen::Vector3d local(UniformRange(rng, -2, 2), UniformRange(rng, -2, 2),
                                UniformRange(rng, 1, 10));
    const Eigen::Vector3d world = cam.CameraToWorld(local);
    const Projection p = Project(world, cam);
    CHECK((p.pixel - MatrixProject(cam, world)).norm() < 1e-9);
  }
}

TEST_CASE("unprojection walks the pixel ray") {
  Rng rng(13);
  for (int i = 0; i < 200; ++i) {
    const CameraModel cam = RandomCamera(rng);
    const Eigen::Vector2d pixel(UniformRange(rng, 0, 639), UniformRange(rng, 0, 479));
    const double depth = UniformRange(rng, 1, 20);
    const Eigen::Vector3d expected = cam.center + depth * WorldRayDirection(cam, pixel);
    CHECK((Unproject(pixel, depth, cam) - expected).norm() < 1e-9 * expected.norm() + 1e-12);
  }
  const CameraModel cam = SimpleCamera();
  const Eigen::Vector3d c = Unproject({cam.cx, cam.cy}, 3.0, cam);
  CHECK((c - Eigen::Vector3d(0, 0, 3)).norm() < 1e-12);
}

TEST_CASE("invalid depths and points behind the camera are rejected") {
  const CameraModel cam = SimpleCamera();
  CHECK_THROWS_AS(Project({0, 0, -1}, cam), GeometryError);
  CHECK_FALSE(TryProject({0, 0, -1}, cam).has_value());
  CHECK_THROWS_AS(Unproject({10, 10}, 0.0, cam), GeometryError);
  CHECK_THROWS_AS(Unproject({10, 10}, -2.0, cam), GeometryError);
}

TEST_CASE("homography between identical cameras is the identity up to scale") {
  Rng rng(14);
  const CameraModel cam = RandomCamera(rng);
  PlaneHypothesis hyp;
  hyp.normal = OrientTowardCamera(Eigen::Vector3d(0.2, -0.1, -1).normalized(),
                                  cam.Ray({100, 100}));
  hyp.depth = 4.0;
  Eigen::Matrix3d h = HomographyForPlane(cam, cam, {100, 100}, hyp);
  h /= h(2, 2);
  CHECK((h - Eigen::Matrix3d::Identity()).norm() < 1e-9);
}

TEST_CASE("fronto-parallel plane with a sideways baseline gives constant disparity") {
  const CameraModel ref = SimpleCamera();
  CameraModel src = ref;
  const double baseline = 0.3, z = 4.0;
  src.center = {baseline, 0, 0};
  PlaneHypothesis hyp;
  hyp.normal = {0, 0, -1};
  hyp.depth = z;
  const Eigen::Matrix3d h = HomographyForPlane(ref, src, {160, 120}, hyp);
  const double disparity = ref.fx * baseline / z;
  for (int y = 0; y < 240; y += 17) {
    for (int x = 0; x < 320; x += 13) {
      const Eigen::Vector2d q = ApplyHomography(h, Eigen::Vector2d(x, y));
      CHECK(q.x() == doctest::Approx(x - disparity).epsilon(1e-12));
      CHECK(q.y() == doctest::Approx(y).epsilon(1e-12));
    }
  }
}

TEST_CASE("homography agrees with intersecting the plane and reprojecting") {
  Rng rng(15);
  int tested = 0;
  while (tested < 500) {
    const CameraModel ref = RandomCamera(rng);
    CameraModel src = RandomCamera(rng);
    src.rotation = Eigen::AngleAxisd(UniformRange(rng, -0.3, 0.3),
                                     Eigen::Vector3d::UnitY()) *
                   ref.rotation;
    src.center = ref.center + Eigen::Vector3d(UniformRange(rng, -0.5, 0.5), 0.1, 0.05);
    const Eigen::Vector2d anchor(UniformRange(rng, 0, 639), UniformRange(rng, 0, 479));
    const Eigen::Vector3d ray = ref.Ray(anchor);
    Eigen::Vector3d n(UniformRange(rng, -1, 1), UniformRange(rng, -1, 1), -1.5);
    n = OrientTowardCamera(n.normalized(), ray);
    PlaneHypothesis hyp{n, UniformRange(rng, 2, 8)};
    const Eigen::Vector3d world_point = ref.CameraToWorld(ray * hyp.depth);
    const Eigen::Vector3d world_n = ref.rotation.transpose() * n;
    const Eigen::Vector2d q = anchor + Eigen::Vector2d(UniformRange(rng, -6, 6),
                                                       UniformRange(rng, -6, 6));
    const Eigen::Vector3d d = WorldRayDirection(ref, q);
    const double t = world_n.dot(world_point - ref.center) / world_n.dot(d);
    const Eigen::Vector3d x = ref.center + t * d;
    if (!(t > 0.1) || !(src.WorldToCamera(x).z() > 0.1)) continue;
    const Eigen::Vector2d warped =
        ApplyHomography(HomographyForPlane(ref, src, anchor, hyp), q);
    CHECK((warped - MatrixProject(src, x)).norm() < 1e-4);
    ++tested;
  }
}

TEST_CASE("ViewPairGeometry matches the one-shot homography") {
  Rng rng(16);
  const CameraModel ref = RandomCamera(rng);
  CameraModel src = ref;
  src.center += Eigen::Vector3d(0.2, 0.05, 0);
  const ViewPairGeometry pair(ref, src);
  PlaneHypothesis hyp{OrientTowardCamera(Eigen::Vector3d(0.1, 0.2, -1).normalized(),
                                         ref.Ray({50, 60})),
                      3.5};
  const auto h = pair.Homography({50, 60}, hyp);
  REQUIRE(h.has_value());
  const Eigen::Matrix3d h2 = HomographyForPlane(ref, src, {50, 60}, hyp);
  CHECK(((*h) / (*h)(2, 2) - h2 / h2(2, 2)).norm() < 1e-9);
}

TEST_CASE("depth from a plane") {
  const CameraModel cam = SimpleCamera();
  PlaneModel z5;
  z5.normal = {0, 0, 1};
  z5.offset = -5;
  for (const Eigen::Vector2d& px : {Eigen::Vector2d(0, 0), Eigen::Vector2d(200, 33)}) {
    CHECK(DepthFromPlane(z5, px, cam) == doctest::Approx(5.0).epsilon(1e-15));
  }

  SUBCASE("slanted planes match a ray-plane intersection") {
    Rng rng(17);
    int tested = 0;
    while (tested < 1000) {
      const CameraModel c = RandomCamera(rng);
      PlaneModel plane;
      plane.normal = Eigen::Vector3d(UniformRange(rng, -1, 1), UniformRange(rng, -1, 1),
                                     UniformRange(rng, -1, 1))
                         .normalized();
      plane.offset = UniformRange(rng, -10, 10);
      const Eigen::Vector2d px(UniformRange(rng, 0, 639), UniformRange(rng, 0, 479));
      const Eigen::Vector3d d = WorldRayDirection(c, px);
      const double denom = plane.normal.dot(d);
      if (std::abs(denom) < 1e-3) continue;
      const double t = -(plane.normal.dot(c.center) + plane.offset) / denom;
      if (!(t > 0.1)) continue;
      CHECK(std::abs(DepthFromPlane(plane, px, c) - t) < 1e-6 * t);
      ++tested;
    }
  }

  SUBCASE("edge-on plane through the camera center is rejected") {
    PlaneModel edge_on;
    edge_on.normal = {1, 0, 0};
    edge_on.offset = 0;
    CHECK_THROWS_AS(DepthFromPlane(edge_on, {cam.cx, 10}, cam), GeometryError);
  }
}

TEST_CASE("plane through three points") {
  const PlaneModel z0 = PlaneFromThreePoints({0, 0, 0}, {1, 0, 0}, {0, 1, 0});
  CHECK(std::abs(std::abs(z0.normal.z()) - 1.0) < 1e-12);
  CHECK(std::abs(z0.offset) < 1e-12);

  Rng rng(18);
  for (int i = 0; i < 500; ++i) {
    const Eigen::Vector3d a = Eigen::Vector3d::Random() * 5;
    const Eigen::Vector3d b = a + Eigen::Vector3d(UniformRange(rng, 0.5, 2), 0.1, 0.2);
    const Eigen::Vector3d c = a + Eigen::Vector3d(0.3, UniformRange(rng, 0.5, 2), -0.4);
    const PlaneModel p = PlaneFromThreePoints(a, b, c);
    CHECK(p.normal.norm() == doctest::Approx(1.0).epsilon(1e-12));
    for (const auto& x : {a, b, c}) CHECK(std::abs(p.SignedDistance(x)) < 1e-9);
  }
  CHECK_THROWS_AS(PlaneFromThreePoints({0, 0, 0}, {1, 1, 1}, {2, 2, 2}), GeometryError);
  CHECK_FALSE(TryPlaneFromThreePoints({0, 0, 0}, {1, 1, 1}, {3, 3, 3}).has_value());
}

TEST_CASE("hypothesis from a plane") {
  const CameraModel cam = SimpleCamera();
  PlaneModel z5;
  z5.normal = {0, 0, 1};
  z5.offset = -5;
  const PlaneHypothesis h = HypothesisFromPlane(z5, {40, 70}, cam);
  CHECK((h.normal - Eigen::Vector3d(0, 0, -1)).norm() < 1e-12);
  CHECK(h.depth == doctest::Approx(5.0));

  SUBCASE("round trip through three unprojected anchors") {
    Rng rng(19);
    const CameraModel c = RandomCamera(rng);
    const Eigen::Vector2d pa(100, 100), pb(300, 120), pc(200, 350);
    const double da = 4.0, db = 4.5, dc = 5.2;
    const PlaneModel plane =
        PlaneFromThreePoints(Unproject(pa, da, c), Unproject(pb, db, c), Unproject(pc, dc, c));
    CHECK(HypothesisFromPlane(plane, pa, c).depth == doctest::Approx(da).epsilon(1e-9));
    CHECK(HypothesisFromPlane(plane, pb, c).depth == doctest::Approx(db).epsilon(1e-9));
    CHECK(DepthFromPlane(plane, pc, c) == doctest::Approx(dc).epsilon(1e-6));
  }

  SUBCASE("slanted plane normal is the rotated world normal") {
    Rng rng(20);
    for (int i = 0; i < 100; ++i) {
      const CameraModel c = RandomCamera(rng);
      PlaneModel plane;
      plane.normal = Eigen::Vector3d(UniformRange(rng, -1, 1), UniformRange(rng, -1, 1),
                                     UniformRange(rng, -1, 1))
                         .normalized();
      const Eigen::Vector2d px(320, 240);
      const Eigen::Vector3d on_ray = Unproject(px, 5.0, c);
      plane.offset = -plane.normal.dot(on_ray);
      const auto hyp = TryHypothesisFromPlane(plane, px, c);
      if (!hyp) continue;
      Eigen::Vector3d expected = c.rotation * plane.normal;
      if (expected.dot(c.Ray(px)) > 0) expected = -expected;
      CHECK((hyp->normal - expected).norm() < 1e-9);
      CHECK(hyp->depth == doctest::Approx(5.0).epsilon(1e-9));
    }
  }
}

TEST_CASE("transferring a hypothesis keeps its plane") {
  const CameraModel cam = SimpleCamera();
  PlaneHypothesis hyp{OrientTowardCamera(Eigen::Vector3d(0.3, 0.1, -1).normalized(),
                                         cam.Ray({100, 80})),
                      3.0};
  const PlaneModel plane = PlaneFromHypothesis(hyp, {100, 80}, cam);
  const auto moved = TransferHypothesis(hyp, {100, 80}, {180, 150}, cam);
  REQUIRE(moved.has_value());
  CHECK(moved->depth == doctest::Approx(DepthFromPlane(plane, {180, 150}, cam)));
  CHECK((moved->normal - hyp.normal).norm() < 1e-12);
}

TEST_CASE("look-at rotation is orthonormal and points at the target") {
  const Eigen::Matrix3d r =
      LookAtRotation({0.3, 0, 0}, {0, 0, 4}, Eigen::Vector3d::UnitY());
  CHECK((r * r.transpose() - Eigen::Matrix3d::Identity()).norm() < 1e-12);
  CHECK(r.determinant() == doctest::Approx(1.0));
  const Eigen::Vector3d forward = r * (Eigen::Vector3d(0, 0, 4) - Eigen::Vector3d(0.3, 0, 0));
  CHECK(std::abs(forward.x()) < 1e-12);
  CHECK(std::abs(forward.y()) < 1e-12);
  CHECK(forward.z() > 0);
}

TEST_CASE("camera validation") {
  CameraModel cam = SimpleCamera();
  CHECK_NOTHROW(cam.Validate());
  cam.fx = 0;
  CHECK_THROWS_AS(cam.Validate(), std::invalid_argument);
  cam = SimpleCamera();
  cam.rotation(0, 0) = 2;
  CHECK_THROWS_AS(cam.Validate(), std::invalid_argument);
  cam = SimpleCamera();
  cam.cx = 1000;
  CHECK_THROWS_AS(cam.Validate(), std::invalid_argument);
}

TEST_CASE("camera file round trip") {
  Rng rng(21);
  std::vector<CameraEntry> entries;
  for (int i = 0; i < 3; ++i) {
    CameraEntry e;
    e.image = "view_" + std::to_string(i) + ".png";
    e.camera = RandomCamera(rng);
    e.depth_min = 1.5 + i;
    e.depth_max = 9.0 + i;
    entries.push_back(e);
  }
  const auto path = (dpe::test::TempDir("geometry") / "cameras.txt").string();
  WriteCameraFile(path, entries);
  const auto back = ReadCameraFile(path);
  REQUIRE(back.size() == entries.size());
  for (size_t i = 0; i < back.size(); ++i) {
    CHECK(back[i].image == entries[i].image);
    CHECK(back[i].camera.fx == entries[i].camera.fx);
    CHECK(back[i].camera.cy == entries[i].camera.cy);
    CHECK((back[i].camera.rotation - entries[i].camera.rotation).norm() == 0.0);
    CHECK((back[i].camera.center - entries[i].camera.center).norm() == 0.0);
    CHECK(back[i].depth_max == entries[i].depth_max);
  }
}
