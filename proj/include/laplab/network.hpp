#pragma once

#include <cstddef>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

namespace laplab
{
    // One (class, pool) edge of the activity tree. Indices are 0-based in memory
    // and 1-based in files.
    struct Activity
    {
        int cls = 0;
        int pool = 0;
        double mu = 0.0;

        bool operator==(const Activity&) const = default;
    };

    // A multi-class, multi-pool service system at fluid scale (r = 1).
    struct Network
    {
        int num_classes = 0;
        int num_pools = 0;
        std::vector<double> lambda;      // per class
        std::vector<double> beta;        // per pool
        std::vector<Activity> activities;

        std::size_t num_activities() const noexcept { return activities.size(); }
        std::optional<std::size_t> activity_index(int cls, int pool) const;
        double mu(int cls, int pool) const;

        // Activity indices touching a class / pool, in storage order.
        std::vector<std::size_t> activities_of_class(int cls) const;
        std::vector<std::size_t> activities_of_pool(int pool) const;

        bool operator==(const Network&) const = default;
    };

    // Every violated structural invariant; empty iff the network is valid.
    std::vector<std::string> validate_network(const Network& net);

    // Throws ValidationError when validate_network reports anything.
    void require_valid(const Network& net);

    Network network_from_json(const nlohmann::json& j);
    nlohmann::json network_to_json(const Network& net);

    Network load_network(const std::string& path);
    void save_network(const Network& net, const std::string& path);
}
