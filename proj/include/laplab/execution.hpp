#pragma once

namespace laplab
{
    enum class Execution
    {
        parallel, // OpenMP over independent jobs
        serial,   // reference loop; identical results
    };
}
