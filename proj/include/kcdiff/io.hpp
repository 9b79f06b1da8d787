#pragma once

#include <filesystem>
#include <string>

#include <json.hpp>

#include "kcdiff/problem.hpp"
#include "kcdiff/world.hpp"

namespace kcdiff {

using Json = nlohmann::json;

Json to_json(const Configuration& q);
Configuration configuration_from_json(const Json& j);

Json to_json(const Trajectory& tau);
Trajectory trajectory_from_json(const Json& j);

/// {"kind":"circle","center":[x,y],"radius":r} or {"kind":"box","min":[..],"max":[..]}.
Json to_json(const Obstacle& o);
Obstacle obstacle_from_json(const Json& j);

/// {"fixtures":[...],"objects":[...],"bounds":{"min":[..],"max":[..]}}.
Json to_json(const Environment& env);
Environment environment_from_json(const Json& j);

Json to_json(const ArmModel& arm);
ArmModel arm_from_json(const Json& j);

/// {"q_s":[...],"q_g":[...],"tau":[[...]...],"env":{...},"phi":"0101..."}; phi omitted when absent.
Json to_json(const DatasetRecord& r);
DatasetRecord record_from_json(const Json& j);

Json read_json_file(const std::filesystem::path& path);
void write_text_file(const std::filesystem::path& path, const std::string& text);

}  // namespace kcdiff
