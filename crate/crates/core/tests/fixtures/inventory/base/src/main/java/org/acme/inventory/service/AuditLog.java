package org.acme.inventory.service;

import java.util.ArrayList;
import java.util.Collections;
import java.util.List;

public class AuditLog {
    private final List<String> entries = new ArrayList<>();

    public synchronized void record(String entry) {
        entries.add(entry);
    }

    public List<String> entries() {
        synchronized (this) {
            return Collections.unmodifiableList(new ArrayList<>(entries));
        }
    }

    public int size() {
        return entries.size();
    }
}
