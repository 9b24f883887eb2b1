#pragma once

#include <array>
#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace earsleep {

/// Four-stage scoring convention of the reference device (30 s epochs).
enum class SleepStage : std::uint8_t { Awake = 0, Core = 1, Deep = 2, REM = 3 };

inline constexpr std::array<SleepStage, 4> kAllStages = {SleepStage::Awake, SleepStage::Core,
                                                         SleepStage::Deep, SleepStage::REM};

enum class BinaryStage : std::uint8_t { Awake = 0, Asleep = 1 };

constexpr BinaryStage to_binary(SleepStage s) noexcept {
  return s == SleepStage::Awake ? BinaryStage::Awake : BinaryStage::Asleep;
}

constexpr bool is_asleep(SleepStage s) noexcept { return to_binary(s) == BinaryStage::Asleep; }

std::string_view to_string(SleepStage s);
std::optional<SleepStage> parse_stage(std::string_view text);

/// Classification task. Class indices are 0..n-1 in the order of class_names().
enum class Task { Binary, Multistage };

std::string_view to_string(Task t);
std::optional<Task> parse_task(std::string_view text);

const std::vector<std::string>& class_names(Task t);
int class_index(SleepStage s, Task t);

}  // namespace earsleep
