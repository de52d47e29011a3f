package org.acme.inventory.util;

import java.util.Collection;

public final class Checks {
    private Checks() {
    }

    @SafeVarargs
    public static <T> T firstNonNull(T... values) {
        for (T v : values) {
            if (v != null) {
                return v;
            }
        }
        throw new IllegalStateException("all null");
    }

    public static void requireNonEmpty(Collection<?> c, String what) {
        if (c.isEmpty()) {
            throw new IllegalArgumentException(what + " is empty");
        }
    }
}
