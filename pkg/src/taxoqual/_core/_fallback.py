import numpy as np


def group_stats(rows, member_cols):
    """Cohesiveness and intruder count of one leaf group.

    ``rows`` is an (m, n) float64 array: similarity of each of the m group
    members to each of the n characteristics in scope.  ``member_cols[i]`` is
    the column of member i inside ``rows``.  Returns ``(min_within, n_ic)``
    where min_within is the smallest ``rows[i, member_cols[j]]`` over i < j and
    n_ic counts entries outside the member columns strictly above it.
    """
    rows = np.asarray(rows, dtype=np.float64)
    cols = np.asarray(member_cols, dtype=np.intp)
    m, n = rows.shape
    if m < 2 or cols.shape != (m,):
        raise ValueError("need at least two members and one column index per member row")
    if cols.min() < 0 or cols.max() >= n or len(np.unique(cols)) != m:
        raise ValueError("member columns must be distinct and inside the row width")
    iu = np.triu_indices(m, 1)
    min_within = float(rows[:, cols][iu].min())
    outside = np.ones(n, dtype=bool)
    outside[cols] = False
    n_ic = int(np.count_nonzero(rows[:, outside] > min_within))
    return min_within, n_ic
