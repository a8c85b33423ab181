#include "escroom/error.hpp"
#include "escroom/runtime.hpp"
#include "scene_fixtures.hpp"

#include <gtest/gtest.h>

#include <fstream>
#include <random>

using namespace escroom;
using testsupport::demo_dir;
using testsupport::RoomChain;

namespace {

World demo() { return assemble_world(demo_dir() / "apartment.html"); }

World from_markup(const std::string& markup) { return assemble_world_source(markup, demo_dir()); }

FrameReport emit(World& w, const std::string& name, double dt = 0) {
  Input in = Input::emit(name);
  return w.step(dt, std::span(&in, 1));
}

int count_type(const FrameReport& r, std::string_view type) {
  return static_cast<int>(std::count_if(r.events.begin(), r.events.end(), [&](const BusEvent& e) { return e.type == type; }));
}

Error assemble_error(const std::string& markup) {
  try {
    from_markup(markup);
  } catch (const Error& e) {
    return e;
  }
  ADD_FAILURE() << "assembled without error";
  return Error(Errc::Io, "none");
}

const char* kFloor =
    R"(<a-entity class="navmesh" position="0 -0.05 0" geometry="primitive: box; width: 6; height: 0.1; depth: 6"></a-entity>)";

}  // namespace

TEST(AssembleWorld, DemoApartment) {
  World w = demo();
  EXPECT_EQ(w.chart().rooms().size(), 2u);
  ASSERT_EQ(w.puzzles().size(), 3u);
  EXPECT_EQ(w.puzzles()[0].name, "puzzle1");
  EXPECT_EQ(w.puzzles()[0].room, "room1");
  EXPECT_EQ(w.puzzles()[0].event, "solved:puzzle1");
  EXPECT_FALSE(w.mesh().empty());
  EXPECT_GT(w.mesh().area(), 30.0);
  EXPECT_EQ(w.config().to_string(), initial_configuration(w.chart()).to_string());
  EXPECT_TRUE(w.config().contains("initializing"));
  EXPECT_EQ(w.mesh().blocker_ids(), std::vector<std::string>{"door1"});
  EXPECT_TRUE(w.mesh().blocker_active("door1"));
  EXPECT_EQ(w.panels().size(), 2u);
  EXPECT_EQ(w.clock().display(), "60:00");
  EXPECT_TRUE(w.clock().running);
  ASSERT_TRUE(w.spawn());
  EXPECT_NEAR(w.spawn()->x(), 1.0, 1e-6);
  EXPECT_TRUE(w.warnings().empty()) << w.warnings().front();

  const Asset& stage = w.assets().at("stage");
  for (const char* door : {"apartmentDoor", "apartmentDoor001", "apartmentDoor002"}) EXPECT_FALSE(stage.visible(door));
  EXPECT_TRUE(stage.visible("floor"));
  EXPECT_TRUE(w.assets().at("watchEntity").visible("watchBody"));

  // watch panel follows its parent selector
  const PanelInstance& watch = w.panels().at("mainWatch");
  EXPECT_NEAR(watch.pose.position.y(), 1.1, 1e-9);
  EXPECT_NEAR(watch.pose.position.z(), 0.7, 1e-9);
}

TEST(AssembleWorld, DoorwayWiderThanClearanceConnectsRooms) {
  // 1 m doorway > 2 r + 2 cs = 0.7 m, so with the blocker lifted the rooms
  // share one component and a path crosses x = 5.
  World w = demo();
  NavMesh open = w.mesh();
  open.set_blocker("door1", false);
  Vec3 a(1, 0, 1), b(8, 0, 3);
  auto comps = open.components();
  auto pa = open.locate(a, 0.01), pb = open.locate(b, 0.01);
  ASSERT_TRUE(pa && pb);
  EXPECT_EQ(comps[static_cast<std::size_t>(*pa)], comps[static_cast<std::size_t>(*pb)]);
  auto path = find_path(open, a, b);
  ASSERT_TRUE(path);
  bool crosses = false;
  for (const Vec3& p : *path) {
    if (p.x() > 4.6 && p.x() < 5.4) {
      EXPECT_GT(p.z(), 2.5);
      EXPECT_LT(p.z(), 3.5);
      crosses = true;
    }
  }
  EXPECT_TRUE(crosses || path->size() == 2);
  EXPECT_FALSE(find_path(w.mesh(), a, b)) << "closed blocker must separate the rooms";
}

TEST(AssembleWorld, NoNavmeshSource) {
  Error e = assemble_error(R"(<a-scene><a-entity id="r" game-state="type:room; name:r"></a-entity></a-scene>)");
  EXPECT_EQ(e.code(), Errc::NoWalkableSurface);
}

TEST(AssembleWorld, UnknownBindingPathsAreListed) {
  std::string markup = std::string("<a-scene>") + kFloor + R"(
    <a-entity id="room1" game-state="type:room; name:room1"></a-entity>
    <a-entity id="p" game-state="type:puzzle; name:p; room:room1" position="0 0 0"></a-entity>
    <a-entity id="a" hide-in-state="state: running.room1.q"></a-entity>
    <a-entity id="b" hide-in-state="state: running.room1.p.solved"></a-entity>
    <a-entity id="c" state-binding="state: running.nowhere"></a-entity>
  </a-scene>)";
  Error e = assemble_error(markup);
  EXPECT_EQ(e.code(), Errc::UnknownStatePath);
  std::string what = e.detail();
  EXPECT_NE(what.find("running.room1.q"), std::string::npos);
  EXPECT_NE(what.find("running.nowhere"), std::string::npos);
  EXPECT_EQ(what.find("running.room1.p.solved"), std::string::npos);
  EXPECT_NE(what.find(":4)"), std::string::npos) << what;

  // every path flagged is absent from the chart, every path accepted is present
  World ok = from_markup(std::string("<a-scene>") + kFloor + R"(
    <a-entity id="room1" game-state="type:room; name:room1"></a-entity>
    <a-entity id="p" game-state="type:puzzle; name:p; room:room1" position="0 0 0"></a-entity>
    <a-entity id="b" hide-in-state="state: running.room1.p.solved"></a-entity>
  </a-scene>)");
  for (const auto& b : ok.bindings()) {
    for (const auto& p : b.paths()) EXPECT_TRUE(ok.chart().has_path(p)) << p;
  }
  EXPECT_FALSE(ok.chart().has_path("running.room1.q"));
}

TEST(AssembleWorld, ErrorsCarryFileAndLine) {
  auto dir = std::filesystem::temp_directory_path() / "escroom_world_test";
  std::filesystem::create_directories(dir);
  auto path = dir / "broken.html";
  {
    std::ofstream(path) << "<a-scene>\n  <a-entity>\n</a-scene>\n";
  }
  try {
    assemble_world(path);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), Errc::UnbalancedTag);
    EXPECT_TRUE(std::string(e.what()).find("broken.html:") != std::string::npos) << e.what();
  }
  Error missing = assemble_error(std::string("<a-scene>") + kFloor +
                                 R"(<a-gltf-model id="m" class="navmesh" src="nope.glb"></a-gltf-model></a-scene>)");
  EXPECT_EQ(missing.code(), Errc::MissingAsset);
  EXPECT_EQ(missing.line(), 1);
  EXPECT_THROW(assemble_world(dir / "absent.html"), Error);
}

TEST(Step, LoadedEntersRunning) {
  World w = demo();
  FrameReport r = emit(w, "loaded");
  EXPECT_NE(std::find(r.entered.begin(), r.entered.end(), "running"), r.entered.end());
  EXPECT_EQ(r.exited, std::vector<std::string>{"initializing"});
  ASSERT_FALSE(r.events.empty());
  EXPECT_EQ(r.events.front(), (BusEvent{"game-state-event", "scene", "loaded"}));
  EXPECT_EQ(count_type(r, "game-state-updated"), 1);
  EXPECT_TRUE(w.config().contains("running.room1.puzzle1.unsolved"));
}

TEST(Step, ZeroInputsZeroDtIsEmpty) {
  World w = demo();
  EXPECT_TRUE(w.step(0).empty());
  emit(w, "loaded");
  EXPECT_TRUE(w.step(0).empty());
  FrameReport r = w.step(0.5);
  ASSERT_EQ(r.slots.size(), 2u);  // floor(3599.5) already reads 59:59
  EXPECT_EQ(w.clock().display(), "59:59");
  EXPECT_TRUE(w.step(0.25).empty());
  EXPECT_THROW(w.step(-1), Error);
  EXPECT_THROW(w.step(std::nan("")), Error);
}

TEST(Step, ClockRunsOutIntoFailed) {
  World w = demo();
  int expired = 0;
  w.add_listener([&](const BusEvent& e) { expired += e.detail == "time-expired"; });
  for (int i = 0; i < 3600; ++i) {
    FrameReport r = w.step(1);
    EXPECT_EQ(w.clock().display(), format_mmss(w.clock().remaining));
    if (i < 3599) EXPECT_FALSE(w.config().contains("failed")) << i;
  }
  EXPECT_EQ(w.clock().display(), "00:00");
  EXPECT_EQ(expired, 1);
  w.step(1);
  EXPECT_EQ(w.config().active_paths, (std::set<std::string>{"failed"}));
  EXPECT_EQ(expired, 1);
}

TEST(Step, ExpiryPreemptsSameStepSolution) {
  RoomChain c;
  c.puzzles = {{"p", 0, 2, 3}};
  c.watch = true;
  c.watch_seconds = 1;
  World w = from_markup(c.markup());
  emit(w, "loaded");
  Input in = Input::emit("solved:p");
  FrameReport r = w.step(1, std::span(&in, 1));
  EXPECT_TRUE(w.config().contains("failed"));
  ASSERT_GE(r.events.size(), 2u);
  EXPECT_EQ(r.events[0].detail, "time-expired");

  // a solution one step earlier wins
  World v = from_markup(c.markup());
  emit(v, "loaded");
  v.step(0.5, std::span(&in, 1));
  EXPECT_TRUE(v.config().contains("escaped"));
  EXPECT_FALSE(v.clock().running);
  v.step(5);
  EXPECT_FALSE(v.clock().expired);
}

TEST(Step, BindingsHoldAfterEveryStep) {
  World w = demo();
  std::vector<std::string> events = w.chart().trigger_events();
  events.push_back("bogus");
  std::mt19937 rng(7);
  std::map<std::string, bool> expected_visible;
  for (const auto& b : w.bindings()) expected_visible[b.subject] = w.visible(b.subject);
  for (int round = 0; round < 400; ++round) {
    std::vector<Input> inputs;
    int n = std::uniform_int_distribution<int>(0, 3)(rng);
    for (int i = 0; i < n; ++i) {
      inputs.push_back(Input::emit(events[std::uniform_int_distribution<std::size_t>(0, events.size() - 1)(rng)]));
    }
    w.step(std::uniform_real_distribution<double>(0, 30)(rng), inputs);
    for (const auto& b : w.bindings()) {
      switch (b.kind) {
        case BindingKind::HideInState: {
          VisibilityChange v = visibility_for(w.config(), b.params);
          if (v != VisibilityChange::NoChange) expected_visible[b.subject] = v == VisibilityChange::Show;
          EXPECT_EQ(w.visible(b.subject), expected_visible[b.subject]);
          break;
        }
        case BindingKind::Blocker: {
          bool open = true;
          for (const auto& p : b.paths()) open = open && state_matches(w.config(), p);
          EXPECT_EQ(w.mesh().blocker_active(b.subject), !open);
          break;
        }
        case BindingKind::Custom: EXPECT_EQ(w.custom_active(b.subject), state_matches(w.config(), b.predicate)); break;
      }
    }
    if (w.config().contains("escaped") || w.config().contains("failed")) w = demo();
  }
}

TEST(Step, DebriefingHidesStage) {
  World w = demo();
  emit(w, "loaded");
  EXPECT_TRUE(w.visible("stage"));
  FrameReport r = emit(w, "next:debriefing");
  EXPECT_FALSE(w.visible("stage"));
  EXPECT_EQ(r.visibility, (std::vector<Toggle>{{"stage", false}}));
}

TEST(Step, ReplayIsDeterministic) {
  auto run = [] {
    World w = demo();
    std::mt19937 rng(99);
    std::vector<std::uint64_t> hashes;
    std::vector<std::string> events = w.chart().trigger_events();
    for (int i = 0; i < 300; ++i) {
      std::vector<Input> in;
      if (std::bernoulli_distribution(0.1)(rng)) {
        in.push_back(Input::emit(events[std::uniform_int_distribution<std::size_t>(0, events.size() - 1)(rng)]));
      }
      std::uniform_real_distribution<double> d(-0.3, 0.3);
      in.push_back(Input::move({d(rng), 0, d(rng)}));
      in.push_back(Input::pointer({{d(rng), 1.6, 2}, {d(rng), d(rng), -1}}, PointerAction::Hover));
      hashes.push_back(w.step(0.1, in).hash());
    }
    return hashes;
  };
  EXPECT_EQ(run(), run());
}

TEST(Step, MovementStaysOnMeshAndDoorBlocks) {
  World w = demo();
  emit(w, "loaded");
  // walk east along the doorway line; the closed door stops the player
  for (int i = 0; i < 200; ++i) {
    Vec3 to = Vec3(8, 0, 3) - w.player().position;
    Input in = Input::move(to.normalized() * std::min(0.14, to.norm()));
    w.step(0.1, std::span(&in, 1));
    ASSERT_TRUE(w.mesh().locate(w.player().position, kSnapTolerance)) << i;
  }
  EXPECT_LT(w.player().position.x(), 4.7);

  emit(w, "solved:puzzle1");
  emit(w, "solved:puzzle2");
  EXPECT_FALSE(w.mesh().blocker_active("door1"));
  auto path = find_path(w.mesh(), w.player().position, Vec3(8, 0, 3));
  ASSERT_TRUE(path);
}

TEST(Step, PointerClickOnLobbyAnchorNavigatesOnce) {
  World w = assemble_world(demo_dir() / "index.html");
  const PanelInstance& panel = w.panels().at("panel");
  const LayoutBox* anchor = nullptr;
  for (const LayoutBox* leaf : panel.layout.leaves()) {
    if (leaf->tag == "a") anchor = leaf;
  }
  ASSERT_NE(anchor, nullptr);
  Vec3 target = panel_to_world(panel.layout, panel.pose, anchor->rect.center());
  Vec3 eye(0, 1.6, 0);
  std::vector<BusEvent> seen;
  w.add_listener([&](const BusEvent& e) { seen.push_back(e); });
  Input hover = Input::pointer({eye, target - eye}, PointerAction::Hover);
  Input click = Input::pointer({eye, target - eye}, PointerAction::Click);
  w.step(0.1, std::span(&hover, 1));
  FrameReport r = w.step(0.1, std::span(&click, 1));
  EXPECT_EQ(count_type(r, "navigate"), 1);
  EXPECT_EQ(count_type(r, "click"), 1);
  auto nav = std::find_if(r.events.begin(), r.events.end(), [](const BusEvent& e) { return e.type == "navigate"; });
  EXPECT_EQ(nav->detail, "/apartment.html");
  EXPECT_EQ(r.events, std::vector<BusEvent>(seen.end() - static_cast<long>(r.events.size()), seen.end()));

  // pointing away leaves the anchor
  Input away = Input::pointer({eye, {0, 0, 1}}, PointerAction::Hover);
  FrameReport left = w.step(0.1, std::span(&away, 1));
  EXPECT_EQ(count_type(left, "mouseleave"), 1);
}

TEST(Step, InputErrorsAreReported) {
  World w = demo();
  std::vector<Input> bad = {Input::emit(""), Input::pointer({{0, 0, 0}, {0, 0, 0}}, PointerAction::Click),
                            Input::move({std::nan(""), 0, 0})};
  FrameReport r = w.step(0, bad);
  EXPECT_EQ(r.errors.size(), 3u);
  EXPECT_FALSE(r.empty());
  World no_rig = from_markup(std::string("<a-scene>") + kFloor + "</a-scene>");
  Input mv = Input::move({1, 0, 0});
  EXPECT_EQ(no_rig.step(0, std::span(&mv, 1)).errors.size(), 1u);
}

TEST(FrameReportJson, HashFollowsContent) {
  FrameReport a, b;
  EXPECT_EQ(a.hash(), b.hash());
  b.events.push_back({"click", "x", ""});
  EXPECT_NE(a.hash(), b.hash());
  EXPECT_TRUE(a.empty());
  EXPECT_FALSE(b.empty());
}
