from .interface_funcs import \
    optimize, baseline, rank_designs, query, report

__all__ = [
    'optimize', 'baseline', 'rank_designs', 'query', 'report']
