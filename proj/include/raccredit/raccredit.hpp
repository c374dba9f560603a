#pragma once

#include "raccredit/core.hpp"
#include "raccredit/system.hpp"
#include "raccredit/system_io.hpp"
#include "raccredit/rng.hpp"
#include "raccredit/scenario.hpp"
#include "raccredit/dispatch.hpp"
#include "raccredit/metrics.hpp"
#include "raccredit/oracle.hpp"
#include "raccredit/gradient.hpp"
#include "raccredit/accreditation.hpp"
