"""Reference slot-resolution kernel; the compiled ``_slot`` module mirrors it."""


def resolve(chans, tx, num_channels, reach, per_receiver):
    """Resolve one time-slot.

    ``chans[i]`` is node i's channel and ``tx[i]`` is 1 when it transmits
    (index 0 unused). ``reach`` is a flat ``(n+1)*(n+1)`` byte matrix.
    Returns ``(air, heard)``: ``air[c]`` is the sole transmitter on channel c
    or 0, ``heard[i]`` is the node whose frame i receives or 0.
    """
    n = len(chans) - 1
    width = n + 1
    count = [0] * (num_channels + 1)
    air = [0] * (num_channels + 1)
    senders = [[] for _ in range(num_channels + 1)]
    for i in range(1, width):
        if tx[i]:
            c = chans[i]
            count[c] += 1
            air[c] = i
            senders[c].append(i)
    for c in range(1, num_channels + 1):
        if count[c] != 1:
            air[c] = 0

    heard = [0] * width
    for i in range(1, width):
        if tx[i]:
            continue
        c = chans[i]
        if per_receiver:
            got = 0
            hits = 0
            for j in senders[c]:
                if reach[j * width + i]:
                    hits += 1
                    got = j
            if hits == 1:
                heard[i] = got
        else:
            s = air[c]
            if s and reach[s * width + i]:
                heard[i] = s
    return air, heard



def step_cached(nodes, parity, table, emit_miss, deliver_miss,
                num_channels, reach, per_receiver, silences):
    """One memoized slot over interned node states.

    ``table`` maps ``id(s)*2 + parity`` to ``[message, channel, transmits, trans]``
    where ``trans`` maps ``id(heard)`` to the next state. ``emit_miss(s, parity)``
    returns ``(message, channel, transmits)``; ``deliver_miss(s, heard, parity)``
    returns ``(next_state, cacheable)``. ``silences[c]`` is channel c's silence.
    """
    n = len(nodes)
    chans = [0] * (n + 1)
    tx = [0] * (n + 1)
    entries = [None] * (n + 1)
    for i, s in enumerate(nodes, start=1):
        key = id(s) * 2 + parity
        entry = table.get(key)
        if entry is None:
            entry = table[key] = [*emit_miss(s, parity), {}]
        entries[i] = entry
        chans[i] = entry[1]
        tx[i] = entry[2]
    _, heard = resolve(chans, tx, num_channels, reach, per_receiver)
    out = []
    for i, s in enumerate(nodes, start=1):
        src = heard[i]
        m = entries[src][0] if src else silences[chans[i]]
        trans = entries[i][3]
        new = trans.get(id(m))
        if new is None:
            new, cacheable = deliver_miss(s, m, parity)
            if cacheable:
                trans[id(m)] = new
        out.append(new)
    return out
