#pragma once

#include <cstdint>
#include <filesystem>
#include <random>
#include <string>
#include <vector>

#include <gtest/gtest.h>

#include "ips/error.hpp"
#include "ips/simulator.hpp"

namespace ips::test {

/// Runs `stmt` and checks that it throws ips::Error with `expected`.
#define EXPECT_IPS_ERROR(stmt, expected)                                          \
  do {                                                                            \
    try {                                                                         \
      stmt;                                                                       \
      ADD_FAILURE() << "expected " << ::ips::to_string(expected) << ", no throw"; \
    } catch (const ::ips::Error& e) {                                             \
      EXPECT_EQ(e.code(), expected) << e.what();                                  \
    }                                                                             \
  } while (0)

/// Fresh directory under the system temp dir, removed on destruction.
class TempDir {
 public:
  explicit TempDir(const std::string& tag) {
    std::random_device rd;
    path_ = std::filesystem::temp_directory_path() /
            ("ips-" + tag + "-" + std::to_string(rd()) + std::to_string(rd()));
    std::filesystem::create_directories(path_);
  }
  ~TempDir() {
    std::error_code ec;
    std::filesystem::remove_all(path_, ec);
  }
  TempDir(const TempDir&) = delete;
  TempDir& operator=(const TempDir&) = delete;

  const std::filesystem::path& path() const noexcept { return path_; }
  std::string file(const std::string& name) const { return (path_ / name).string(); }

 private:
  std::filesystem::path path_;
};

struct Session {
  Scenario scenario;
  SimConfig config;
  Trajectory trajectory;
  std::vector<Record> records;
};

inline Session simulate(std::uint64_t seed, double duration_s, bool noiseless = false) {
  Session s;
  s.scenario = build_scenario(seed);
  s.config.duration_s = duration_s;
  if (noiseless) s.config.noise = NoiseConfig::none();
  s.trajectory = generate_trajectory(s.scenario, s.config.duration_s, s.config.speed_mps,
                                     s.config.rates.gt, s.config.trajectory);
  s.records = sample_sensors(s.scenario, s.config, s.trajectory);
  return s;
}

}  // namespace ips::test
