public class Service {
    int v0 = compute(0); // @bug-easy
    int v1 = compute(1); // @bug-hard
    int v2 = compute(2); // @bug-easy
    int v3 = compute(3); // @bug-hard
    int v4 = compute(4); // @bug-easy
    int v5 = compute(5); // @bug-hard
    int v6 = compute(6); // @bug-easy
    int v7 = compute(7); // @bug-hard
    int v8 = compute(8); // @bug-easy
    int v9 = compute(9); // @bug-hard
    int v10 = compute(10); // @bug-easy
    int v11 = compute(11); // @bug-hard
    int v12 = compute(12); // @bug-easy
    int v13 = compute(13); // @bug-hard
    int v14 = compute(14); // @bug-easy
    int v15 = compute(15); // @bug-hard
    int v16 = compute(16); // @bug-easy
    int v17 = compute(17); // @bug-hard
    int v18 = compute(18); // @bug-easy
    int v19 = compute(19); // @bug-hard
    int v20 = compute(20); // @bug-easy
    int v21 = compute(21); // @bug-hard
    int v22 = compute(22); // @bug-easy
    int v23 = compute(23); // @bug-hard
    int v24 = compute(24); // @bug-easy
    int v25 = compute(25); // @bug-hard
    int v26 = compute(26); // @vuln-hard
}
