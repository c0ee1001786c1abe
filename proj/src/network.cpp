#include "laplab/network.hpp"

#include <fstream>
#include <numeric>
#include <sstream>

#include "laplab/errors.hpp"

namespace laplab
{
    namespace
    {
        std::string join(const std::vector<std::string>& items)
        {
            std::string out;
            for (const auto& s : items)
            {
                if (!out.empty())
                    out += "; ";
                out += s;
            }
            return out;
        }

        // Union-find over classes [0, I) and pools [I, I+J).
        struct DisjointSets
        {
            std::vector<int> parent;
            explicit DisjointSets(int n) : parent(n) { std::iota(parent.begin(), parent.end(), 0); }
            int find(int v)
            {
                while (parent[v] != v)
                {
                    parent[v] = parent[parent[v]];
                    v = parent[v];
                }
                return v;
            }
            bool unite(int a, int b)
            {
                a = find(a);
                b = find(b);
                if (a == b)
                    return false;
                parent[b] = a;
                return true;
            }
        };
    }

    ValidationError::ValidationError(std::vector<std::string> v)
        : Error("invalid network: " + join(v)), violations(std::move(v))
    {
    }

    std::optional<std::size_t> Network::activity_index(int cls, int pool) const
    {
        for (std::size_t e = 0; e < activities.size(); ++e)
            if (activities[e].cls == cls && activities[e].pool == pool)
                return e;
        return std::nullopt;
    }

    double Network::mu(int cls, int pool) const
    {
        auto e = activity_index(cls, pool);
        return e ? activities[*e].mu : 0.0;
    }

    std::vector<std::size_t> Network::activities_of_class(int cls) const
    {
        std::vector<std::size_t> out;
        for (std::size_t e = 0; e < activities.size(); ++e)
            if (activities[e].cls == cls)
                out.push_back(e);
        return out;
    }

    std::vector<std::size_t> Network::activities_of_pool(int pool) const
    {
        std::vector<std::size_t> out;
        for (std::size_t e = 0; e < activities.size(); ++e)
            if (activities[e].pool == pool)
                out.push_back(e);
        return out;
    }

    std::vector<std::string> validate_network(const Network& net)
    {
        std::vector<std::string> v;
        const int I = net.num_classes;
        const int J = net.num_pools;
        if (I <= 0)
            v.push_back("number of classes must be positive");
        if (J <= 0)
            v.push_back("number of pools must be positive");
        if (static_cast<int>(net.lambda.size()) != I)
            v.push_back("lambda has " + std::to_string(net.lambda.size()) + " entries, expected " + std::to_string(I));
        if (static_cast<int>(net.beta.size()) != J)
            v.push_back("beta has " + std::to_string(net.beta.size()) + " entries, expected " + std::to_string(J));
        for (std::size_t i = 0; i < net.lambda.size(); ++i)
            if (!(net.lambda[i] > 0.0))
                v.push_back("arrival rate of class " + std::to_string(i + 1) + " must be positive");
        for (std::size_t j = 0; j < net.beta.size(); ++j)
            if (!(net.beta[j] > 0.0))
                v.push_back("size of pool " + std::to_string(j + 1) + " must be positive");
        if (I <= 0 || J <= 0)
            return v;

        bool indices_ok = true;
        for (std::size_t e = 0; e < net.activities.size(); ++e)
        {
            const auto& a = net.activities[e];
            const std::string name = "activity (" + std::to_string(a.cls + 1) + "," + std::to_string(a.pool + 1) + ")";
            if (a.cls < 0 || a.cls >= I || a.pool < 0 || a.pool >= J)
            {
                v.push_back(name + " references an unknown class or pool");
                indices_ok = false;
                continue;
            }
            if (!(a.mu > 0.0))
                v.push_back(name + " must have a positive service rate");
            for (std::size_t f = 0; f < e; ++f)
                if (net.activities[f].cls == a.cls && net.activities[f].pool == a.pool)
                {
                    v.push_back(name + " is listed more than once");
                    indices_ok = false;
                }
        }
        if (!indices_ok)
            return v;

        std::vector<int> class_deg(I, 0), pool_deg(J, 0);
        for (const auto& a : net.activities)
        {
            ++class_deg[a.cls];
            ++pool_deg[a.pool];
        }
        for (int i = 0; i < I; ++i)
            if (class_deg[i] == 0)
                v.push_back("class " + std::to_string(i + 1) + " has no activity");
        for (int j = 0; j < J; ++j)
            if (pool_deg[j] == 0)
                v.push_back("pool " + std::to_string(j + 1) + " has no activity");

        DisjointSets ds(I + J);
        bool cyclic = false;
        for (const auto& a : net.activities)
            if (!ds.unite(a.cls, I + a.pool))
                cyclic = true;
        const bool tree_count = static_cast<int>(net.activities.size()) == I + J - 1;
        if (cyclic || !tree_count)
        {
            std::ostringstream os;
            os << "activity set not a tree (" << net.activities.size() << " activities, a tree on "
               << I << " classes and " << J << " pools has " << (I + J - 1) << ")";
            v.push_back(os.str());
        }
        else
        {
            int root = ds.find(0);
            for (int k = 1; k < I + J; ++k)
                if (ds.find(k) != root)
                {
                    v.push_back("activity graph not connected");
                    break;
                }
        }
        return v;
    }

    void require_valid(const Network& net)
    {
        auto v = validate_network(net);
        if (!v.empty())
            throw ValidationError(std::move(v));
    }

    Network network_from_json(const nlohmann::json& j)
    {
        Network net;
        try
        {
            net.num_classes = j.at("classes").get<int>();
            net.num_pools = j.at("pools").get<int>();
            net.lambda = j.at("lambda").get<std::vector<double>>();
            net.beta = j.at("beta").get<std::vector<double>>();
            for (const auto& t : j.at("activities"))
            {
                if (!t.is_array() || t.size() != 3)
                    throw ValidationError({"each activity must be an [i, j, mu] triple"});
                net.activities.push_back({t[0].get<int>() - 1, t[1].get<int>() - 1, t[2].get<double>()});
            }
        }
        catch (const nlohmann::json::exception& e)
        {
            throw ValidationError({std::string("malformed network JSON: ") + e.what()});
        }
        return net;
    }

    nlohmann::json network_to_json(const Network& net)
    {
        nlohmann::json acts = nlohmann::json::array();
        for (const auto& a : net.activities)
            acts.push_back(nlohmann::json::array({a.cls + 1, a.pool + 1, a.mu}));
        nlohmann::json j;
        j["classes"] = net.num_classes;
        j["pools"] = net.num_pools;
        j["lambda"] = net.lambda;
        j["beta"] = net.beta;
        j["activities"] = acts;
        return j;
    }

    Network load_network(const std::string& path)
    {
        std::ifstream in(path);
        if (!in)
            throw Error("cannot open network file '" + path + "'");
        nlohmann::json j;
        try
        {
            in >> j;
        }
        catch (const nlohmann::json::exception& e)
        {
            throw ValidationError({"network file '" + path + "' is not valid JSON: " + e.what()});
        }
        return network_from_json(j);
    }

    void save_network(const Network& net, const std::string& path)
    {
        std::ofstream out(path);
        if (!out)
            throw Error("cannot write network file '" + path + "'");
        out << network_to_json(net).dump(2) << '\n';
    }
}
