"""
Database utility functions for the convergence-run archive
"""

import math

from database_models import ConvergenceEntry, ConvergenceRun, create_tables, get_session


def _join(values):
    return ",".join(str(v) for v in values)


def store_convergence_run(records, method, levels, summary=None, bind=None):
    """
    Store a convergence run and all of its records

    Parameters:
    -----------
    records : list of ConvergenceRecord
        Rows produced by experiments.run_ladder, possibly for several orders
    method : str
        Right inverse used for kernel L
    levels : sequence of int
        Refinement ladder
    summary : dict, optional
        Extra details stored as JSON (terminal slopes)
    bind : Engine, optional
        Database engine, the DATABASE_URL engine when omitted

    Returns:
    --------
    dict
        The stored run: id, case, orders, kernels, levels and the entry count
    """
    create_tables(bind)
    session = get_session(bind)
    try:
        orders = sorted({r.m for r in records})
        kernels = list(dict.fromkeys(r.kernel for r in records))
        cases = sorted({r.case for r in records})
        run = ConvergenceRun(
            case=_join(cases),
            method=method,
            orders=_join(orders),
            kernels=_join(kernels),
            levels=_join(levels),
            details=summary or {},
        )
        for r in records:
            run.entries.append(ConvergenceEntry(
                m=r.m,
                case=r.case,
                kernel=r.kernel,
                N=r.N,
                h=r.h,
                l2_error=r.l2_error,
                slope=None if r.slope is None or math.isnan(r.slope) else r.slope,
            ))
        session.add(run)
        session.commit()

        # Create a dictionary of the run data before closing the session
        run_data = {
            'id': run.id,
            'case': run.case,
            'method': run.method,
            'orders': run.orders,
            'kernels': run.kernels,
            'levels': run.levels,
            'entries': len(run.entries),
            'created': run.created.isoformat() if run.created else None,
        }
        return run_data
    except Exception as e:
        session.rollback()
        raise e
    finally:
        session.close()


def get_run_history(limit=10, bind=None):
    """
    Get the most recent convergence runs

    Parameters:
    -----------
    limit : int, optional
        The maximum number of runs to return

    Returns:
    --------
    list of dict
        Newest first
    """
    create_tables(bind)
    session = get_session(bind)
    try:
        runs = session.query(ConvergenceRun).order_by(
            ConvergenceRun.created.desc(), ConvergenceRun.id.desc()
        ).limit(limit).all()
        return [
            {
                'id': run.id,
                'created': run.created.isoformat() if run.created else None,
                'case': run.case,
                'method': run.method,
                'orders': run.orders,
                'kernels': run.kernels,
                'levels': run.levels,
                'details': run.details,
            }
            for run in runs
        ]
    finally:
        session.close()


def get_run_records(run_id, bind=None):
    """
    Get the entries of one run ordered as they were produced

    Returns:
    --------
    list of dict
        Keys m, case, kernel, N, h, l2_error, slope; empty for an unknown run
    """
    create_tables(bind)
    session = get_session(bind)
    try:
        entries = session.query(ConvergenceEntry).filter_by(
            run_id=run_id
        ).order_by(
            ConvergenceEntry.id
        ).all()
        return [
            {
                'm': e.m,
                'case': e.case,
                'kernel': e.kernel,
                'N': e.N,
                'h': e.h,
                'l2_error': e.l2_error,
                'slope': e.slope,
            }
            for e in entries
        ]
    finally:
        session.close()
