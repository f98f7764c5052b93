#ifndef TRANSPORT_TRANSPORT_HPP
#define TRANSPORT_TRANSPORT_HPP

#include "transport/bootstrap.hpp"
#include "transport/config.hpp"
#include "transport/data.hpp"
#include "transport/diagnostics.hpp"
#include "transport/errors.hpp"
#include "transport/estimators.hpp"
#include "transport/models.hpp"
#include "transport/parallel.hpp"
#include "transport/report.hpp"
#include "transport/rng.hpp"
#include "transport/simulation.hpp"

#endif  // TRANSPORT_TRANSPORT_HPP
