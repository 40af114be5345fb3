import logging

from celery import shared_task

from .exceptions import InfeasibleModel, SolverLimitReached, UnboundedModel
from .milp import MilpError, SolverLimits
from .models import DegradationMode
from .serializers import scenario_from_dict, scenario_to_dict, schedule_from_dict, schedule_to_dict
from .sorc import solve_sorc

logger = logging.getLogger(__name__)


def limits_to_dict(limits):
    if limits is None:
        return {}
    return {"max_nodes": limits.max_nodes, "rel_gap": limits.rel_gap, "time_limit": limits.time_limit}


def sorc_payload(scenario, limits=None, degradation=DegradationMode.REMAINING_CAPACITY):
    return {"scenario": scenario_to_dict(scenario), "limits": limits_to_dict(limits), "degradation": degradation}


def failure(kind, exc, rows=()):
    return {"ok": False, "error": kind, "message": str(exc), "rows": list(rows)}


def raise_failure(result, subject):
    """Re-raise a failure returned by ``solve_sorc_task``."""
    if result["error"] == "infeasible":
        raise InfeasibleModel(result["rows"], subject=subject)
    if result["error"] == "limit":
        raise SolverLimitReached(result["message"])
    if result["error"] == "unbounded":
        raise UnboundedModel(result["message"])
    raise MilpError(result["message"])


def schedule_from_result(result):
    return schedule_from_dict(result["schedule"])


@shared_task
def solve_sorc_task(payload):
    scenario = scenario_from_dict(payload["scenario"])
    limits = SolverLimits.from_settings(**payload.get("limits", {}))
    logger.info(f"Solving S-ORC for {scenario.id}")
    try:
        schedule = solve_sorc(scenario, limits, payload.get("degradation", DegradationMode.REMAINING_CAPACITY))
    except InfeasibleModel as e:
        logger.warning(f"Scenario {scenario.id} infeasible: {e}")
        return failure("infeasible", e, e.rows)
    except SolverLimitReached as e:
        logger.warning(str(e))
        return failure("limit", e)
    except UnboundedModel as e:
        return failure("unbounded", e)
    except MilpError as e:
        logger.exception(f"Solver error for {scenario.id}")
        return failure("solver", e)
    return {"ok": True, "schedule": schedule_to_dict(schedule)}


@shared_task
def run_variant_task(payload):
    from .sweeps import evaluate_variant

    scenario = scenario_from_dict(payload["scenario"])
    limits = SolverLimits.from_settings(**payload.get("limits", {}))
    logger.info(f"Running sweep variant {payload['label']}")
    return evaluate_variant(payload["label"], scenario, payload["metrics"], limits)
