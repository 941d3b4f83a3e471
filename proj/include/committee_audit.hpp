#pragma once

#include "committee_audit/anchors.hpp"
#include "committee_audit/committee.hpp"
#include "committee_audit/error.hpp"
#include "committee_audit/io.hpp"
#include "committee_audit/metrics.hpp"
#include "committee_audit/parallel.hpp"
#include "committee_audit/profiles.hpp"
#include "committee_audit/random.hpp"
#include "committee_audit/report.hpp"
#include "committee_audit/specificity.hpp"
#include "committee_audit/sweep.hpp"
#include "committee_audit/synth.hpp"
#include "committee_audit/topk.hpp"
#include "committee_audit/trace.hpp"
